#include "refinerl/training.hpp"

#include <cmath>
#include <stdexcept>

namespace refinerl {

namespace {

RunLogRow eval_row(const RunState& run, const TrainSetup& setup, const std::string& phase,
                   double alpha) {
  const EvalReport report =
      evaluate_policy(run.agent, setup.spec, run.stats, setup.eval_episodes,
                      derive_seed(run.seed, stream::kEvaluation));
  RunLogRow row;
  row.global_step = run.global_step;
  row.phase = phase;
  row.seed = run.seed;
  row.alpha = alpha;
  row.mean_return = report.mean;
  row.std_return = report.stddev;
  row.normalized_score = normalized_score(report.mean, setup.refs);
  return row;
}

// Baseline-style offline loop shared by train_offline and the ablations.
RunLog offline_loop(RunState& run, const TransitionDataset& dataset, const Hyperparams& hp,
                    std::uint64_t steps, std::uint64_t eval_every, double alpha,
                    const std::string& phase, const TrainSetup& setup, const TrainHooks* hooks) {
  RunLog log;
  run.phase = phase;
  run.alpha_at = alpha;
  log.push_back(eval_row(run, setup, phase, alpha));
  for (std::uint64_t step = 1; step <= steps; ++step) {
    const Batch batch = sample_minibatch(dataset, hp.batch_size, run.rng, run.stats);
    if (!hp.bc_only) {
      critic_update(run.agent, batch, hp, run.rng);
    }
    const auto actor_report = maybe_update_targets_and_actor(run.agent, batch, hp, alpha);
    run.global_step += 1;
    if (actor_report && hooks && hooks->on_actor_update) {
      hooks->on_actor_update(run.global_step, *actor_report);
    }
    if (step % eval_every == 0 || step == steps) {
      log.push_back(eval_row(run, setup, phase, alpha));
    }
  }
  return log;
}

}  // namespace

std::string to_string(AblationMode mode) {
  switch (mode) {
    case AblationMode::none: return "none";
    case AblationMode::low_alpha_from_start: return "low_alpha_from_start";
    case AblationMode::refine_with_critic: return "refine_with_critic";
    case AblationMode::extended_baseline: return "extended_baseline";
  }
  throw std::logic_error("unreachable ablation mode");
}

AblationMode ablation_mode_from_string(const std::string& name) {
  if (name == "none") return AblationMode::none;
  if (name == "low_alpha_from_start") return AblationMode::low_alpha_from_start;
  if (name == "refine_with_critic") return AblationMode::refine_with_critic;
  if (name == "extended_baseline") return AblationMode::extended_baseline;
  throw std::invalid_argument("unknown ablation mode: " + name);
}

double scale_alpha(double alpha, double lambda) {
  if (lambda < 1.0) {
    throw std::invalid_argument("scaling factor lambda must be >= 1");
  }
  if (alpha < 0.0) {
    throw std::invalid_argument("alpha must be non-negative");
  }
  return alpha / lambda;
}

double decay_rate(double alpha_start, double alpha_end, std::uint64_t n) {
  if (!(alpha_start > 0.0) || !(alpha_end > 0.0)) {
    throw std::invalid_argument("decay endpoints must be positive");
  }
  if (alpha_end > alpha_start) {
    throw std::invalid_argument("alpha_end must not exceed alpha_start");
  }
  if (n == 0) {
    throw std::invalid_argument("decay needs at least one step");
  }
  return std::exp(std::log(alpha_end / alpha_start) / static_cast<double>(n));
}

RunState init_run(const TransitionDataset& dataset, const Hyperparams& hp,
                  const TrainSetup& setup, std::uint64_t seed) {
  validate(hp);
  RunState run;
  run.seed = seed;
  run.rng = Rng(seed);
  run.agent = make_agent(setup.spec.obs_dim, setup.spec.act_dim, setup.hidden_dim,
                         setup.spec.action_bound, hp, run.rng);
  run.stats = compute_norm_stats(dataset);
  run.alpha_at = hp.alpha;
  return run;
}

RunLog train_offline(RunState& run, const TransitionDataset& dataset, const Hyperparams& hp,
                     const OfflineSchedule& schedule, const TrainSetup& setup,
                     const TrainHooks* hooks) {
  return offline_loop(run, dataset, hp, schedule.baseline_steps, schedule.eval_every, hp.alpha,
                      "baseline", setup, hooks);
}

RunLog refine_policy(RunState& run, const TransitionDataset& dataset, const Hyperparams& hp,
                     const OfflineSchedule& schedule, const TrainSetup& setup,
                     const TrainHooks* hooks) {
  const double alpha_refined = scale_alpha(hp.alpha, schedule.lambda);
  RunLog log;
  run.phase = "refined";
  run.alpha_at = alpha_refined;
  log.push_back(eval_row(run, setup, "refined", alpha_refined));
  for (std::uint64_t step = 1; step <= schedule.refine_steps; ++step) {
    const Batch batch = sample_minibatch(dataset, hp.batch_size, run.rng, run.stats);
    const UpdateReport report = actor_update(run.agent, batch, hp, alpha_refined);
    polyak_update(run.agent.target_actor, run.agent.actor, hp.tau);
    run.global_step += 1;
    if (hooks && hooks->on_actor_update) {
      hooks->on_actor_update(run.global_step, report);
    }
    if (step % schedule.eval_every == 0 || step == schedule.refine_steps) {
      log.push_back(eval_row(run, setup, "refined", alpha_refined));
    }
  }
  return log;
}

RunLog train_online(RunState& run, const Hyperparams& hp, const OnlineLoopConfig& cfg,
                    const TrainSetup& setup, ReplayBuffer* buffer_out, const TrainHooks* hooks) {
  const bool constant_alpha = cfg.alpha_start == cfg.alpha_end;
  const double kappa =
      constant_alpha ? 1.0 : decay_rate(cfg.alpha_start, cfg.alpha_end, cfg.train_steps);
  double alpha = cfg.alpha_start;

  ReplayBuffer buffer(cfg.buffer_capacity);
  const std::uint64_t env_seed = derive_seed(run.seed, stream::kEnvironment);
  std::uint64_t episode_index = 0;
  EnvState env = env_reset(setup.spec, derive_seed(env_seed, episode_index));
  std::vector<double> obs = observe(setup.spec, env);

  const auto interact = [&](bool uniform_random) {
    std::vector<double> action;
    if (uniform_random) {
      action.resize(setup.spec.act_dim);
      for (double& a : action) {
        a = run.rng.uniform(-setup.spec.action_bound, setup.spec.action_bound);
      }
    } else {
      action = select_action(run.agent, obs, run.stats, hp.exploration_sigma, run.rng);
    }
    const StepResult step = env_step(setup.spec, env, action);
    buffer.push(Transition{obs, action, step.reward, step.next_obs, step.terminal});
    if (env.done) {
      episode_index += 1;
      env = env_reset(setup.spec, derive_seed(env_seed, episode_index));
      obs = observe(setup.spec, env);
    } else {
      obs = step.next_obs;
    }
  };

  RunLog log;
  run.phase = cfg.phase;
  run.alpha_at = alpha;
  log.push_back(eval_row(run, setup, cfg.phase, alpha));

  for (std::uint64_t m = 0; m < cfg.prefill_steps; ++m) {
    interact(cfg.uniform_random_prefill);
  }

  for (std::uint64_t n = 1; n <= cfg.train_steps; ++n) {
    interact(false);
    const Batch batch = sample_minibatch(buffer, hp.batch_size, run.rng, run.stats);
    if (!hp.bc_only) {
      critic_update(run.agent, batch, hp, run.rng);
    }
    const auto actor_report = maybe_update_targets_and_actor(run.agent, batch, hp, alpha);
    alpha *= kappa;
    run.global_step += 1;
    run.alpha_at = alpha;
    if (actor_report && hooks && hooks->on_actor_update) {
      hooks->on_actor_update(run.global_step, *actor_report);
    }
    if (n % cfg.eval_every == 0 || n == cfg.train_steps) {
      log.push_back(eval_row(run, setup, cfg.phase, alpha));
    }
  }
  if (buffer_out) {
    *buffer_out = std::move(buffer);
  }
  return log;
}

RunLog finetune_online(RunState& run, const Hyperparams& hp, const FinetuneSchedule& schedule,
                       const TrainSetup& setup, std::uint64_t eval_every,
                       const TrainHooks* hooks) {
  if (!(schedule.alpha_end > 0.0) || schedule.alpha_end > schedule.alpha_start) {
    throw std::invalid_argument("fine-tuning requires 0 < alpha_end <= alpha_start");
  }
  if (schedule.prefill_steps == 0 || schedule.decay_steps == 0) {
    throw std::invalid_argument("fine-tuning schedule must have positive step counts");
  }
  OnlineLoopConfig cfg;
  cfg.prefill_steps = schedule.prefill_steps;
  cfg.train_steps = schedule.decay_steps;
  cfg.alpha_start = schedule.alpha_start;
  cfg.alpha_end = schedule.alpha_end;
  cfg.buffer_capacity = schedule.buffer_capacity;
  cfg.eval_every = eval_every;
  cfg.phase = "finetuned";
  return train_online(run, hp, cfg, setup, nullptr, hooks);
}

AblationResult run_ablation(AblationMode mode, const TransitionDataset& dataset,
                            const Hyperparams& hp, const OfflineSchedule& schedule,
                            const TrainSetup& setup, std::uint64_t seed,
                            const TrainHooks* hooks) {
  AblationResult result;
  result.run = init_run(dataset, hp, setup, seed);
  switch (mode) {
    case AblationMode::none: {
      result.log = train_offline(result.run, dataset, hp, schedule, setup, hooks);
      RunLog refined = refine_policy(result.run, dataset, hp, schedule, setup, hooks);
      result.log.insert(result.log.end(), refined.begin(), refined.end());
      break;
    }
    case AblationMode::low_alpha_from_start: {
      const double alpha_low = scale_alpha(hp.alpha, schedule.lambda);
      result.log = offline_loop(result.run, dataset, hp, schedule.baseline_steps,
                                schedule.eval_every, alpha_low, "baseline", setup, hooks);
      break;
    }
    case AblationMode::refine_with_critic: {
      result.log = train_offline(result.run, dataset, hp, schedule, setup, hooks);
      const double alpha_refined = scale_alpha(hp.alpha, schedule.lambda);
      const std::uint64_t critic_steps = hp.critic_to_actor_ratio * schedule.refine_steps;
      RunLog refined = offline_loop(result.run, dataset, hp, critic_steps, schedule.eval_every,
                                    alpha_refined, "refined", setup, hooks);
      result.log.insert(result.log.end(), refined.begin(), refined.end());
      break;
    }
    case AblationMode::extended_baseline: {
      OfflineSchedule extended = schedule;
      extended.baseline_steps = schedule.baseline_steps + schedule.baseline_steps / 2;
      result.log = train_offline(result.run, dataset, hp, extended, setup, hooks);
      break;
    }
  }
  return result;
}

}  // namespace refinerl
