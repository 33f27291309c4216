#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "refinerl/dataset.hpp"
#include "refinerl/rng.hpp"

namespace refinerl {

struct EnvSpec {
  std::string name;
  std::size_t obs_dim = 0;
  std::size_t act_dim = 0;
  double action_bound = 1.0;
  std::size_t horizon = 200;
  double dt = 0.05;
};

struct EnvState {
  std::string env;
  std::vector<double> internal;  // pendulum: (theta, theta_dot); pointmass: (px, py, vx, vy)
  std::size_t elapsed_steps = 0;
  Rng rng;
  bool done = false;
};

struct StepResult {
  std::vector<double> next_obs;
  double reward = 0.0;
  bool terminal = false;  // dynamics-driven end; masks the Bellman bootstrap
  bool timeout = false;   // horizon reached; bootstrap continues
};

// Registry lookup by name ("pendulum" or "pointmass"). Throws on unknown names.
EnvSpec env_spec(const std::string& name);
std::vector<std::string> env_names();

// Deterministic initial state for (spec, seed).
// pendulum:  theta ~ U[-pi, pi] then theta_dot ~ U[-1, 1]
// pointmass: px, py ~ U[-0.1, 0.1] in order, velocity zero
EnvState env_reset(const EnvSpec& spec, std::uint64_t seed);

std::vector<double> observe(const EnvSpec& spec, const EnvState& state);

// Semi-implicit Euler step (velocity first, then position). Actions are
// clipped to the spec bound before use; the reward is evaluated at the
// pre-step state with the clipped action. Throws if called on a finished
// episode.
StepResult env_step(const EnvSpec& spec, EnvState& state, std::span<const double> action);

using PolicyFn = std::function<std::vector<double>(std::span<const double>)>;

struct EpisodeRollout {
  std::vector<Transition> transitions;
  double episode_return = 0.0;
};

// Episode i uses sub-seeds derive_seed(seed, 2i) for the environment and
// derive_seed(seed, 2i+1) for exploration noise, so episodes are independent
// of each other. Gaussian exploration noise is added per action component
// and the result clipped to the action bound; sigma = 0 draws nothing.
std::vector<EpisodeRollout> rollout(const EnvSpec& spec, const PolicyFn& policy,
                                    std::uint64_t seed, std::size_t episodes,
                                    double exploration_sigma);

// One episode of the sequence rollout() would produce.
EpisodeRollout rollout_episode(const EnvSpec& spec, const PolicyFn& policy, std::uint64_t seed,
                               std::size_t episode_index, double exploration_sigma);

struct ReferenceScores {
  std::string env;
  double random_return = 0.0;
  double expert_return = 0.0;
};

// random_return: mean return of a uniform-random policy over 100 episodes;
// expert_return: mean deterministic return of the expert over 100 episodes.
// Throws if the expert fails to beat the random policy.
ReferenceScores compute_reference_scores(const EnvSpec& spec, const PolicyFn& expert_policy,
                                         std::uint64_t seed);

}  // namespace refinerl
