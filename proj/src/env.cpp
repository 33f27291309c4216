#include "refinerl/env.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace refinerl {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Pendulum constants (classic-control convention).
constexpr double kGravity = 10.0;
constexpr double kMaxSpeed = 8.0;
constexpr double kTorqueBound = 2.0;

// Point mass.
constexpr double kGoalX = 0.7;
constexpr double kGoalY = 0.7;
constexpr double kGoalRadius = 0.05;
constexpr double kVelBound = 1.0;

double clip(double v, double lo, double hi) { return std::min(std::max(v, lo), hi); }

// Wrap an angle into [-pi, pi].
double wrap_angle(double theta) {
  double w = std::fmod(theta + kPi, 2.0 * kPi);
  if (w < 0.0) w += 2.0 * kPi;
  return w - kPi;
}

}  // namespace

EnvSpec env_spec(const std::string& name) {
  if (name == "pendulum") {
    return EnvSpec{"pendulum", 3, 1, kTorqueBound, 200, 0.05};
  }
  if (name == "pointmass") {
    return EnvSpec{"pointmass", 6, 2, 1.0, 200, 0.05};
  }
  throw std::invalid_argument("unknown environment: " + name);
}

std::vector<std::string> env_names() { return {"pendulum", "pointmass"}; }

EnvState env_reset(const EnvSpec& spec, std::uint64_t seed) {
  EnvState state;
  state.env = spec.name;
  state.rng = Rng(seed);
  state.elapsed_steps = 0;
  state.done = false;
  if (spec.name == "pendulum") {
    const double theta = state.rng.uniform(-kPi, kPi);
    const double theta_dot = state.rng.uniform(-1.0, 1.0);
    state.internal = {theta, theta_dot};
  } else if (spec.name == "pointmass") {
    const double px = state.rng.uniform(-0.1, 0.1);
    const double py = state.rng.uniform(-0.1, 0.1);
    state.internal = {px, py, 0.0, 0.0};
  } else {
    throw std::invalid_argument("unknown environment: " + spec.name);
  }
  return state;
}

std::vector<double> observe(const EnvSpec& spec, const EnvState& state) {
  if (spec.name == "pendulum") {
    return {std::cos(state.internal[0]), std::sin(state.internal[0]), state.internal[1]};
  }
  const double px = state.internal[0], py = state.internal[1];
  return {px, py, state.internal[2], state.internal[3], kGoalX - px, kGoalY - py};
}

StepResult env_step(const EnvSpec& spec, EnvState& state, std::span<const double> action) {
  if (state.done) {
    throw std::logic_error("env_step called on a finished episode");
  }
  if (action.size() != spec.act_dim) {
    throw std::invalid_argument("action dimension does not match environment");
  }
  StepResult result;
  if (spec.name == "pendulum") {
    const double u = clip(action[0], -spec.action_bound, spec.action_bound);
    const double theta = state.internal[0];
    const double theta_dot = state.internal[1];
    const double w = wrap_angle(theta);
    result.reward = -(w * w + 0.1 * theta_dot * theta_dot + 0.001 * u * u);
    // theta_ddot = (3g/2l) sin(theta) + (3/ml^2) u with g=10, m=l=1
    const double new_theta_dot =
        clip(theta_dot + spec.dt * (1.5 * kGravity * std::sin(theta) + 3.0 * u), -kMaxSpeed,
             kMaxSpeed);
    state.internal[0] = theta + spec.dt * new_theta_dot;
    state.internal[1] = new_theta_dot;
    result.terminal = false;
  } else if (spec.name == "pointmass") {
    const double ax = clip(action[0], -spec.action_bound, spec.action_bound);
    const double ay = clip(action[1], -spec.action_bound, spec.action_bound);
    const double dx = state.internal[0] - kGoalX;
    const double dy = state.internal[1] - kGoalY;
    result.reward = -std::sqrt(dx * dx + dy * dy) - 0.01 * (ax * ax + ay * ay);
    state.internal[2] = clip(state.internal[2] + ax * spec.dt, -kVelBound, kVelBound);
    state.internal[3] = clip(state.internal[3] + ay * spec.dt, -kVelBound, kVelBound);
    state.internal[0] += state.internal[2] * spec.dt;
    state.internal[1] += state.internal[3] * spec.dt;
    const double gx = state.internal[0] - kGoalX;
    const double gy = state.internal[1] - kGoalY;
    result.terminal = std::sqrt(gx * gx + gy * gy) < kGoalRadius;
  } else {
    throw std::invalid_argument("unknown environment: " + spec.name);
  }
  state.elapsed_steps += 1;
  result.timeout = !result.terminal && state.elapsed_steps == spec.horizon;
  state.done = result.terminal || result.timeout;
  result.next_obs = observe(spec, state);
  return result;
}

EpisodeRollout rollout_episode(const EnvSpec& spec, const PolicyFn& policy, std::uint64_t seed,
                               std::size_t episode_index, double exploration_sigma) {
  if (exploration_sigma < 0.0) {
    throw std::invalid_argument("exploration sigma must be non-negative");
  }
  EnvState state = env_reset(spec, derive_seed(seed, 2 * episode_index));
  Rng noise(derive_seed(seed, 2 * episode_index + 1));
  EpisodeRollout episode;
  std::vector<double> obs = observe(spec, state);
  while (!state.done) {
    std::vector<double> action = policy(obs);
    if (exploration_sigma > 0.0) {
      for (double& a : action) a += noise.normal(0.0, exploration_sigma);
    }
    for (double& a : action) a = clip(a, -spec.action_bound, spec.action_bound);
    const StepResult step = env_step(spec, state, action);
    episode.transitions.push_back(
        Transition{obs, action, step.reward, step.next_obs, step.terminal});
    episode.episode_return += step.reward;
    obs = step.next_obs;
  }
  return episode;
}

std::vector<EpisodeRollout> rollout(const EnvSpec& spec, const PolicyFn& policy,
                                    std::uint64_t seed, std::size_t episodes,
                                    double exploration_sigma) {
  if (episodes == 0) {
    throw std::invalid_argument("rollout needs at least one episode");
  }
  std::vector<EpisodeRollout> result;
  result.reserve(episodes);
  for (std::size_t ep = 0; ep < episodes; ++ep) {
    result.push_back(rollout_episode(spec, policy, seed, ep, exploration_sigma));
  }
  return result;
}

ReferenceScores compute_reference_scores(const EnvSpec& spec, const PolicyFn& expert_policy,
                                         std::uint64_t seed) {
  constexpr std::size_t kEpisodes = 100;
  const std::uint64_t random_seed = derive_seed(seed, 0);
  const std::uint64_t expert_seed = derive_seed(seed, 1);

  double random_sum = 0.0;
  for (std::size_t ep = 0; ep < kEpisodes; ++ep) {
    EnvState state = env_reset(spec, derive_seed(random_seed, 2 * ep));
    Rng actions(derive_seed(random_seed, 2 * ep + 1));
    while (!state.done) {
      std::vector<double> action(spec.act_dim);
      for (double& a : action) a = actions.uniform(-spec.action_bound, spec.action_bound);
      random_sum += env_step(spec, state, action).reward;
    }
  }

  double expert_sum = 0.0;
  for (const EpisodeRollout& ep : rollout(spec, expert_policy, expert_seed, kEpisodes, 0.0)) {
    expert_sum += ep.episode_return;
  }

  ReferenceScores refs;
  refs.env = spec.name;
  refs.random_return = random_sum / static_cast<double>(kEpisodes);
  refs.expert_return = expert_sum / static_cast<double>(kEpisodes);
  if (refs.expert_return <= refs.random_return) {
    throw std::runtime_error("expert policy does not beat the random policy on " + spec.name +
                             " (expert " + std::to_string(refs.expert_return) + ", random " +
                             std::to_string(refs.random_return) + ")");
  }
  return refs;
}

}  // namespace refinerl
