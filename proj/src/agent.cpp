#include "refinerl/agent.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace refinerl {

namespace {

double clip(double v, double lo, double hi) { return std::min(std::max(v, lo), hi); }

constexpr double kDenomGuard = 1e-8;

}  // namespace

void validate(const Hyperparams& hp) {
  if (!(hp.gamma > 0.0) || hp.gamma > 1.0) {
    throw std::invalid_argument("gamma must lie in (0, 1]");
  }
  if (!(hp.tau > 0.0) || hp.tau > 1.0) {
    throw std::invalid_argument("tau must lie in (0, 1]");
  }
  if (hp.critic_to_actor_ratio < 1) {
    throw std::invalid_argument("critic-to-actor ratio must be at least 1");
  }
  if (hp.alpha < 0.0) {
    throw std::invalid_argument("alpha must be non-negative");
  }
  if (hp.policy_noise < 0.0 || hp.noise_clip < 0.0 || hp.exploration_sigma < 0.0) {
    throw std::invalid_argument("noise scales must be non-negative");
  }
  if (hp.batch_size == 0) {
    throw std::invalid_argument("batch size must be at least 1");
  }
  if (!(hp.actor_lr > 0.0) || !(hp.critic_lr > 0.0)) {
    throw std::invalid_argument("learning rates must be positive");
  }
}

AgentParams make_agent(std::size_t obs_dim, std::size_t act_dim, std::size_t hidden_dim,
                       double action_bound, const Hyperparams& hp, Rng& rng) {
  const std::vector<std::size_t> critic_dims{obs_dim + act_dim, hidden_dim, hidden_dim, 1};
  const std::vector<std::size_t> actor_dims{obs_dim, hidden_dim, hidden_dim, act_dim};
  AgentParams agent;
  agent.critic1 = make_mlp(critic_dims, OutputActivation::identity, 1.0, rng);
  agent.critic2 = make_mlp(critic_dims, OutputActivation::identity, 1.0, rng);
  agent.actor = make_mlp(actor_dims, OutputActivation::tanh_scaled, action_bound, rng);
  agent.target_critic1 = agent.critic1;
  agent.target_critic2 = agent.critic2;
  agent.target_actor = agent.actor;
  agent.critic1_opt = make_adam(agent.critic1, hp.critic_lr);
  agent.critic2_opt = make_adam(agent.critic2, hp.critic_lr);
  agent.actor_opt = make_adam(agent.actor, hp.actor_lr);
  return agent;
}

RealMatrix target_action(const AgentParams& agent, const RealMatrix& next_states,
                         const Hyperparams& hp, Rng& rng) {
  RealMatrix actions = actor_forward(agent.target_actor, next_states);
  const double bound = agent.target_actor.bound;
  for (double& a : actions.data) {
    double noise = 0.0;
    if (hp.policy_noise > 0.0) {
      noise = clip(rng.normal(0.0, hp.policy_noise), -hp.noise_clip, hp.noise_clip);
    }
    a = clip(a + noise, -bound, bound);
  }
  return actions;
}

std::vector<double> critic_targets(const AgentParams& agent, const Batch& batch,
                                   const Hyperparams& hp, Rng& rng) {
  const std::size_t n = batch.next_states.rows;
  const RealMatrix next_actions = target_action(agent, batch.next_states, hp, rng);
  const std::vector<double> q1 =
      critic_forward(agent.target_critic1, batch.next_states, next_actions);
  const std::vector<double> q2 =
      critic_forward(agent.target_critic2, batch.next_states, next_actions);
  std::vector<double> targets(n);
  for (std::size_t i = 0; i < n; ++i) {
    targets[i] =
        batch.rewards[i] + hp.gamma * (1.0 - batch.terminal[i]) * std::min(q1[i], q2[i]);
    if (!std::isfinite(targets[i])) {
      throw std::runtime_error("critic target diverged (non-finite value at batch row " +
                               std::to_string(i) + ")");
    }
  }
  return targets;
}

double critic_loss_value(const MlpParams& critic, const Batch& batch,
                         std::span<const double> targets) {
  const std::vector<double> q = critic_forward(critic, batch.states, batch.actions);
  double sq_err = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    const double err = q[i] - targets[i];
    sq_err += err * err;
  }
  return sq_err / static_cast<double>(q.size());
}

std::pair<double, GradientBundle> critic_loss_gradient(const MlpParams& critic,
                                                       const Batch& batch,
                                                       std::span<const double> targets) {
  const std::size_t n = batch.states.rows;
  ForwardCache cache;
  const std::vector<double> q = critic_forward(critic, batch.states, batch.actions, &cache);
  RealMatrix out_grad(n, 1);
  double sq_err = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double err = q[i] - targets[i];
    sq_err += err * err;
    out_grad.at(i, 0) = 2.0 * err / static_cast<double>(n);
  }
  GradientBundle grads = mlp_backward(critic, cache, out_grad);
  return {sq_err / static_cast<double>(n), std::move(grads)};
}

UpdateReport critic_update(AgentParams& agent, const Batch& batch, const Hyperparams& hp,
                           Rng& rng) {
  const std::vector<double> targets = critic_targets(agent, batch, hp, rng);
  UpdateReport report;
  report.alpha_used = hp.alpha;
  auto [loss1, grads1] = critic_loss_gradient(agent.critic1, batch, targets);
  adam_step(agent.critic1, agent.critic1_opt, grads1, StepDirection::descent);
  auto [loss2, grads2] = critic_loss_gradient(agent.critic2, batch, targets);
  adam_step(agent.critic2, agent.critic2_opt, grads2, StepDirection::descent);
  report.critic_loss = 0.5 * (loss1 + loss2);
  return report;
}

std::pair<std::vector<double>, double> normalize_q(std::span<const double> q) {
  if (q.empty()) {
    throw std::invalid_argument("normalize_q needs a non-empty batch");
  }
  double mean_abs = 0.0;
  for (double v : q) mean_abs += std::abs(v);
  mean_abs /= static_cast<double>(q.size());
  const double denom = mean_abs < kDenomGuard ? 1.0 : mean_abs;
  std::vector<double> out(q.size());
  for (std::size_t i = 0; i < q.size(); ++i) out[i] = q[i] / denom;
  return {std::move(out), mean_abs};
}

std::pair<UpdateReport, GradientBundle> actor_objective_gradient(const AgentParams& agent,
                                                                 const Batch& batch,
                                                                 const Hyperparams& hp,
                                                                 double alpha) {
  const std::size_t n = batch.states.rows;
  const std::size_t act_dim = agent.actor.output_dim();
  const auto nd = static_cast<double>(n);
  const auto ad = static_cast<double>(act_dim);

  ForwardCache actor_cache;
  const RealMatrix actions = actor_forward(agent.actor, batch.states, &actor_cache);

  UpdateReport report;
  report.alpha_used = alpha;

  // d(objective)/d(pi), assembled from the Q path and the BC penalty.
  RealMatrix action_grad(n, act_dim);

  if (!hp.bc_only) {
    ForwardCache critic_cache;
    const std::vector<double> q =
        critic_forward(agent.critic1, batch.states, actions, &critic_cache);
    auto [q_norm, mean_abs] = normalize_q(q);
    report.mean_abs_q = mean_abs;
    const double denom = mean_abs < kDenomGuard ? 1.0 : mean_abs;
    double q_sum = 0.0;
    for (double v : q_norm) q_sum += v;
    report.actor_objective += q_sum / nd;

    RealMatrix out_grad(n, 1);
    for (std::size_t i = 0; i < n; ++i) out_grad.at(i, 0) = 1.0 / (nd * denom);
    const RealMatrix input_grad = mlp_backward_input_only(agent.critic1, critic_cache, out_grad);
    const std::size_t obs_dim = batch.states.cols;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < act_dim; ++j) {
        action_grad.at(i, j) = input_grad.at(i, obs_dim + j);
      }
    }
  }

  double bc_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < act_dim; ++j) {
      const double diff = actions.at(i, j) - batch.actions.at(i, j);
      bc_sum += diff * diff;
      action_grad.at(i, j) -= alpha * 2.0 * diff / (nd * ad);
    }
  }
  report.bc_mse = bc_sum / (nd * ad);
  report.actor_objective -= alpha * report.bc_mse;

  if (!std::isfinite(report.actor_objective)) {
    throw std::runtime_error("actor objective diverged (non-finite)");
  }

  GradientBundle grads = mlp_backward(agent.actor, actor_cache, action_grad);
  return {report, std::move(grads)};
}

double actor_objective_value(const AgentParams& agent, const Batch& batch,
                             const Hyperparams& hp, double alpha, double denom) {
  const std::size_t n = batch.states.rows;
  const std::size_t act_dim = agent.actor.output_dim();
  const RealMatrix actions = actor_forward(agent.actor, batch.states);
  double objective = 0.0;
  if (!hp.bc_only) {
    const std::vector<double> q = critic_forward(agent.critic1, batch.states, actions);
    double q_sum = 0.0;
    for (double v : q) q_sum += v / denom;
    objective += q_sum / static_cast<double>(n);
  }
  double bc_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < act_dim; ++j) {
      const double diff = actions.at(i, j) - batch.actions.at(i, j);
      bc_sum += diff * diff;
    }
  }
  objective -= alpha * bc_sum / static_cast<double>(n * act_dim);
  return objective;
}

UpdateReport actor_update(AgentParams& agent, const Batch& batch, const Hyperparams& hp,
                          double alpha) {
  auto [report, grads] = actor_objective_gradient(agent, batch, hp, alpha);
  adam_step(agent.actor, agent.actor_opt, grads, StepDirection::ascent);
  return report;
}

std::optional<UpdateReport> maybe_update_targets_and_actor(AgentParams& agent, const Batch& batch,
                                                           const Hyperparams& hp, double alpha) {
  agent.update_counter += 1;
  if (agent.update_counter % hp.critic_to_actor_ratio != 0) {
    return std::nullopt;
  }
  UpdateReport report = actor_update(agent, batch, hp, alpha);
  polyak_update(agent.target_critic1, agent.critic1, hp.tau);
  polyak_update(agent.target_critic2, agent.critic2, hp.tau);
  polyak_update(agent.target_actor, agent.actor, hp.tau);
  return report;
}

std::vector<double> select_action(const AgentParams& agent, std::span<const double> raw_state,
                                  const NormStats& stats, double exploration_sigma, Rng& rng) {
  const std::vector<double> normalized = normalize_state(stats, raw_state);
  RealMatrix input(1, normalized.size());
  for (std::size_t d = 0; d < normalized.size(); ++d) input.at(0, d) = normalized[d];
  const RealMatrix out = actor_forward(agent.actor, input);
  const double bound = agent.actor.bound;
  std::vector<double> action(out.cols);
  for (std::size_t j = 0; j < out.cols; ++j) {
    double a = out.at(0, j);
    if (exploration_sigma > 0.0) {
      a += rng.normal(0.0, exploration_sigma);
    }
    action[j] = clip(a, -bound, bound);
  }
  return action;
}

}  // namespace refinerl
