#include "refinerl/suite.hpp"

#include <stdexcept>
#include <string>

namespace refinerl {

namespace {

constexpr std::uint64_t kBehaviorStream = 11;
constexpr std::uint64_t kExpertRolloutStream = 12;
constexpr std::uint64_t kMediumRolloutStream = 13;
constexpr std::uint64_t kReferenceStream = 14;

RunState fresh_behavior_run(const EnvSpec& spec, std::uint64_t seed, const Hyperparams& hp,
                            const SuiteConfig& cfg) {
  RunState run;
  run.seed = derive_seed(seed, kBehaviorStream);
  run.rng = Rng(run.seed);
  run.agent =
      make_agent(spec.obs_dim, spec.act_dim, cfg.hidden_dim, spec.action_bound, hp, run.rng);
  run.stats = NormStats::identity(spec.obs_dim);
  return run;
}

OnlineLoopConfig behavior_loop_config(const SuiteConfig& cfg, std::uint64_t train_steps) {
  OnlineLoopConfig loop;
  loop.prefill_steps = cfg.behavior_prefill;
  loop.train_steps = train_steps;
  loop.alpha_start = 0.0;  // plain TD3, no BC term
  loop.alpha_end = 0.0;
  loop.buffer_capacity = cfg.buffer_capacity;
  loop.eval_every = cfg.behavior_eval_every;
  loop.phase = "behavior";
  loop.uniform_random_prefill = true;
  return loop;
}

PolicyFn deterministic_policy(const RunState& run) {
  return [&run](std::span<const double> obs) {
    Rng unused(0);
    return select_action(run.agent, obs, run.stats, 0.0, unused);
  };
}

TransitionDataset rollout_dataset(const EnvSpec& spec, const RunState& policy_run,
                                  std::uint64_t rollout_seed, std::size_t n, double sigma,
                                  DatasetLevel level, std::uint64_t suite_seed,
                                  const std::string& behavior_desc) {
  TransitionDataset dataset;
  dataset.meta.env = spec.name;
  dataset.meta.level = level;
  dataset.meta.seed = suite_seed;
  dataset.meta.behavior = behavior_desc;
  dataset.obs_dim = spec.obs_dim;
  dataset.act_dim = spec.act_dim;
  dataset.transitions.reserve(n);
  const PolicyFn policy = deterministic_policy(policy_run);
  std::size_t episode = 0;
  while (dataset.transitions.size() < n) {
    // One episode at a time so the transition count can be cut exactly.
    const EpisodeRollout ep = rollout_episode(spec, policy, rollout_seed, episode, sigma);
    for (const Transition& t : ep.transitions) {
      if (dataset.transitions.size() == n) break;
      dataset.transitions.push_back(t);
    }
    episode += 1;
  }
  return dataset;
}

}  // namespace

SuiteResult generate_suite(const EnvSpec& spec, std::uint64_t seed, const Hyperparams& hp,
                           const SuiteConfig& cfg) {
  if (cfg.expert_n < 1000 || cfg.medium_n < 1000) {
    throw std::invalid_argument("suite sizes must be at least 1000 transitions");
  }
  Hyperparams behavior_hp = hp;
  behavior_hp.alpha = 0.0;
  behavior_hp.bc_only = false;

  // Pass 1: full behaviour training -> expert policy.
  SuiteResult result;
  TrainSetup setup;
  setup.spec = spec;
  setup.hidden_dim = cfg.hidden_dim;
  setup.eval_episodes = cfg.eval_episodes;
  // Normalised scores are not defined until the references exist; log rows
  // during behaviour training carry a placeholder of 0 for that column.
  setup.refs = ReferenceScores{spec.name, 0.0, 1.0};

  RunState expert_run = fresh_behavior_run(spec, seed, behavior_hp, cfg);
  result.behavior_log = train_online(expert_run, behavior_hp,
                                     behavior_loop_config(cfg, cfg.behavior_steps), setup);

  result.refs = compute_reference_scores(spec, deterministic_policy(expert_run),
                                         derive_seed(seed, kReferenceStream));

  // Medium snapshot: first evaluation whose deterministic return clears a
  // third of the random-to-expert gap.
  const double threshold =
      result.refs.random_return + (result.refs.expert_return - result.refs.random_return) / 3.0;
  std::uint64_t snapshot_step = 0;
  bool found = false;
  for (const RunLogRow& row : result.behavior_log) {
    if (row.global_step > 0 && row.mean_return >= threshold) {
      snapshot_step = row.global_step;
      found = true;
      break;
    }
  }
  if (!found) {
    throw std::runtime_error(
        "behaviour training never reached the medium threshold on " + spec.name + " (threshold " +
        std::to_string(threshold) + ", expert " + std::to_string(result.refs.expert_return) +
        ", random " + std::to_string(result.refs.random_return) + ")");
  }

  // Pass 2: deterministic replay up to the snapshot, keeping the buffer.
  RunState medium_run = fresh_behavior_run(spec, seed, behavior_hp, cfg);
  ReplayBuffer medium_buffer(cfg.buffer_capacity);
  train_online(medium_run, behavior_hp, behavior_loop_config(cfg, snapshot_step), setup,
               &medium_buffer);

  const std::string expert_desc =
      "td3_online_alpha0_steps" + std::to_string(cfg.behavior_steps);
  const std::string medium_desc = "td3_online_alpha0_steps" + std::to_string(snapshot_step);

  result.expert = rollout_dataset(spec, expert_run, derive_seed(seed, kExpertRolloutStream),
                                  cfg.expert_n, hp.exploration_sigma, DatasetLevel::expert, seed,
                                  expert_desc);
  result.medium = rollout_dataset(spec, medium_run, derive_seed(seed, kMediumRolloutStream),
                                  cfg.medium_n, hp.exploration_sigma, DatasetLevel::medium, seed,
                                  medium_desc);

  result.medium_replay.meta.env = spec.name;
  result.medium_replay.meta.level = DatasetLevel::medium_replay;
  result.medium_replay.meta.seed = seed;
  result.medium_replay.meta.behavior = medium_desc;
  result.medium_replay.obs_dim = spec.obs_dim;
  result.medium_replay.act_dim = spec.act_dim;
  result.medium_replay.transitions.reserve(medium_buffer.size());
  for (std::size_t i = 0; i < medium_buffer.size(); ++i) {
    result.medium_replay.transitions.push_back(medium_buffer.chronological(i));
  }

  result.medium_expert.meta.env = spec.name;
  result.medium_expert.meta.level = DatasetLevel::medium_expert;
  result.medium_expert.meta.seed = seed;
  result.medium_expert.meta.behavior = medium_desc + "+" + expert_desc;
  result.medium_expert.obs_dim = spec.obs_dim;
  result.medium_expert.act_dim = spec.act_dim;
  result.medium_expert.transitions = result.medium.transitions;
  result.medium_expert.transitions.insert(result.medium_expert.transitions.end(),
                                          result.expert.transitions.begin(),
                                          result.expert.transitions.end());

  const auto note_params = [&](TransitionDataset& ds) {
    ds.meta.params = {{"generator", "xoshiro256ss"},
                      {"exploration_sigma", std::to_string(hp.exploration_sigma)},
                      {"behavior_steps", std::to_string(cfg.behavior_steps)},
                      {"snapshot_step", std::to_string(snapshot_step)},
                      {"hidden_dim", std::to_string(cfg.hidden_dim)}};
  };
  note_params(result.expert);
  note_params(result.medium);
  note_params(result.medium_replay);
  note_params(result.medium_expert);

  expert_run.phase = "behavior_expert";
  medium_run.phase = "behavior_medium";
  result.expert_run = std::move(expert_run);
  result.medium_run = std::move(medium_run);
  return result;
}

}  // namespace refinerl
