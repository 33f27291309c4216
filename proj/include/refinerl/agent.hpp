#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "refinerl/adam.hpp"
#include "refinerl/dataset.hpp"
#include "refinerl/mlp.hpp"
#include "refinerl/rng.hpp"

namespace refinerl {

struct Hyperparams {
  double gamma = 0.99;
  double tau = 0.005;
  double policy_noise = 0.2;  // std of the target-smoothing noise
  double noise_clip = 0.5;
  std::uint64_t critic_to_actor_ratio = 2;
  double alpha = 0.4;
  std::size_t batch_size = 256;
  double actor_lr = 3e-4;
  double critic_lr = 3e-4;
  double exploration_sigma = 0.1;
  // Behavioural cloning only: the actor objective drops the Q term and the
  // training loop skips critic updates entirely.
  bool bc_only = false;
};

// Throws when a field is outside its domain (gamma and tau in (0, 1],
// ratio >= 1, alpha >= 0, positive batch and learning rates).
void validate(const Hyperparams& hp);

struct AgentParams {
  MlpParams critic1, critic2, actor;
  MlpParams target_critic1, target_critic2, target_actor;
  AdamState critic1_opt, critic2_opt, actor_opt;
  std::uint64_t update_counter = 0;
};

// Networks are initialised in the order critic1, critic2, actor from the
// given generator; targets start as bit-equal copies.
AgentParams make_agent(std::size_t obs_dim, std::size_t act_dim, std::size_t hidden_dim,
                       double action_bound, const Hyperparams& hp, Rng& rng);

struct UpdateReport {
  double critic_loss = 0.0;
  double actor_objective = 0.0;
  double mean_abs_q = 0.0;
  double bc_mse = 0.0;
  double alpha_used = 0.0;
};

// a' = clip( pi_target(s') + clip(noise, -noise_clip, +noise_clip), -bound, +bound )
// with noise ~ N(0, policy_noise) drawn per component, row-major.
RealMatrix target_action(const AgentParams& agent, const RealMatrix& next_states,
                         const Hyperparams& hp, Rng& rng);

// y = r + gamma * (1 - terminal) * min(Q'_1(s', a'), Q'_2(s', a')) with a'
// from target_action. Reads only target networks; throws on non-finite
// values.
std::vector<double> critic_targets(const AgentParams& agent, const Batch& batch,
                                   const Hyperparams& hp, Rng& rng);

// Mean squared error of one critic against fixed targets, and its gradient.
double critic_loss_value(const MlpParams& critic, const Batch& batch,
                         std::span<const double> targets);
std::pair<double, GradientBundle> critic_loss_gradient(const MlpParams& critic,
                                                       const Batch& batch,
                                                       std::span<const double> targets);

// One descent step on each critic toward the shared targets, which are held
// constant.
UpdateReport critic_update(AgentParams& agent, const Batch& batch, const Hyperparams& hp,
                           Rng& rng);

// q / mean(|q|), with the denominator replaced by 1 when mean |q| < 1e-8.
// Returns the normalised batch and the mean absolute value.
std::pair<std::vector<double>, double> normalize_q(std::span<const double> q);

// Objective mean_B[ Q1_norm(s, pi(s)) - alpha * mse(pi(s), a) ] and its
// gradient with respect to the actor parameters. The normalisation
// denominator is a constant in the gradient; the report carries the
// objective, mean |Q| and the BC mse. With hp.bc_only the Q term is dropped.
std::pair<UpdateReport, GradientBundle> actor_objective_gradient(const AgentParams& agent,
                                                                 const Batch& batch,
                                                                 const Hyperparams& hp,
                                                                 double alpha);

// Objective value at a fixed normalisation denominator (for derivative
// checks against the gradient above).
double actor_objective_value(const AgentParams& agent, const Batch& batch,
                             const Hyperparams& hp, double alpha, double denom);

// One ascent step on the objective; critic and target parameters are
// untouched.
UpdateReport actor_update(AgentParams& agent, const Batch& batch, const Hyperparams& hp,
                          double alpha);

// Counts calls; on every ratio-th call runs actor_update and then Polyak-
// updates all three target networks. Returns the actor report when it ran.
std::optional<UpdateReport> maybe_update_targets_and_actor(AgentParams& agent, const Batch& batch,
                                                           const Hyperparams& hp, double alpha);

// Normalises the raw state, queries the actor, adds N(0, sigma) exploration
// noise (sigma > 0 only) and clips to the action bound.
std::vector<double> select_action(const AgentParams& agent, std::span<const double> raw_state,
                                  const NormStats& stats, double exploration_sigma, Rng& rng);

}  // namespace refinerl
