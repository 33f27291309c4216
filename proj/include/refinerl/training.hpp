#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "refinerl/agent.hpp"
#include "refinerl/dataset.hpp"
#include "refinerl/env.hpp"
#include "refinerl/evaluation.hpp"

namespace refinerl {

struct OfflineSchedule {
  std::uint64_t baseline_steps = 100000;  // gradient steps of the first phase
  std::uint64_t refine_steps = 25000;     // policy-only refinement steps
  double lambda = 5.0;                    // BC coefficient divisor, >= 1
  std::uint64_t eval_every = 5000;
};

struct FinetuneSchedule {
  std::uint64_t prefill_steps = 5000;
  std::uint64_t decay_steps = 24500;
  double alpha_start = 0.4;
  double alpha_end = 0.2;
  std::size_t buffer_capacity = 1000000;
};

enum class AblationMode { none, low_alpha_from_start, refine_with_critic, extended_baseline };

std::string to_string(AblationMode mode);
AblationMode ablation_mode_from_string(const std::string& name);

struct RunLogRow {
  std::uint64_t global_step = 0;
  std::string phase;
  std::uint64_t seed = 0;
  double alpha = 0.0;
  double mean_return = 0.0;
  double std_return = 0.0;
  double normalized_score = 0.0;
};

using RunLog = std::vector<RunLogRow>;

// alpha' = alpha / lambda (lambda >= 1).
double scale_alpha(double alpha, double lambda);

// kappa = exp( log(alpha_end / alpha_start) / n ), so alpha_start * kappa^n
// lands on alpha_end.
double decay_rate(double alpha_start, double alpha_end, std::uint64_t n);

// Everything a run carries between phases: one generator stream drives
// weight initialisation, minibatch sampling, target smoothing noise and
// exploration noise, so a later phase continues exactly where the previous
// one stopped. Evaluation and environment resets use seed-derived
// sub-streams and never touch this stream.
struct RunState {
  AgentParams agent;
  NormStats stats;
  Rng rng;
  std::uint64_t seed = 0;
  std::uint64_t global_step = 0;
  double alpha_at = 0.0;
  std::string phase = "init";
};

struct TrainSetup {
  EnvSpec spec;
  ReferenceScores refs;
  std::size_t hidden_dim = 256;
  std::size_t eval_episodes = 10;
};

// Optional telemetry; invoked with the global step after each actor update.
struct TrainHooks {
  std::function<void(std::uint64_t, const UpdateReport&)> on_actor_update;
};

// Sub-stream indices off the run seed (see rng.hpp for the derive rule).
namespace stream {
inline constexpr std::uint64_t kEvaluation = 101;  // fixed eval episodes per run
inline constexpr std::uint64_t kEnvironment = 202; // online episode resets
}  // namespace stream

RunState init_run(const TransitionDataset& dataset, const Hyperparams& hp,
                  const TrainSetup& setup, std::uint64_t seed);

// Phase 1: baseline TD3-BC. `steps` iterations of sample / critic update /
// ratio-gated actor+target update at the given BC coefficient. Logs a
// deterministic evaluation at step 0, every eval_every steps, and at the end.
RunLog train_offline(RunState& run, const TransitionDataset& dataset, const Hyperparams& hp,
                     const OfflineSchedule& schedule, const TrainSetup& setup,
                     const TrainHooks* hooks = nullptr);

// Phase 2: policy refinement with alpha' = alpha / lambda. Only the actor
// is trained and only the actor target is Polyak-updated; every critic
// parameter is bit-identical before and after.
RunLog refine_policy(RunState& run, const TransitionDataset& dataset, const Hyperparams& hp,
                     const OfflineSchedule& schedule, const TrainSetup& setup,
                     const TrainHooks* hooks = nullptr);

// Online fine-tuning: fresh replay buffer, prefill_steps exploratory
// transitions without updates, then decay_steps iterations of act / store /
// sample / update with alpha shrinking by kappa each step. Normalisation
// statistics stay frozen. Requires 0 < alpha_end <= alpha_start.
RunLog finetune_online(RunState& run, const Hyperparams& hp, const FinetuneSchedule& schedule,
                       const TrainSetup& setup, std::uint64_t eval_every,
                       const TrainHooks* hooks = nullptr);

struct AblationResult {
  RunState run;
  RunLog log;
};

// none:                train_offline then refine_policy, unchanged.
// low_alpha_from_start: baseline only, with alpha/lambda for every step.
// refine_with_critic:  baseline, then 2*refine_steps full critic+actor
//                      iterations at alpha/lambda (ratio-gated, so exactly
//                      refine_steps policy updates).
// extended_baseline:   baseline stretched to floor(1.5 * baseline_steps),
//                      no refinement.
AblationResult run_ablation(AblationMode mode, const TransitionDataset& dataset,
                            const Hyperparams& hp, const OfflineSchedule& schedule,
                            const TrainSetup& setup, std::uint64_t seed,
                            const TrainHooks* hooks = nullptr);

// Shared online loop: also used with alpha_start = alpha_end = 0 to train
// behaviour policies from scratch (plain TD3). `snapshot_step`, when nonzero,
// stops the loop after that many online training steps and hands back the
// buffer so callers can capture mid-training state.
struct OnlineLoopConfig {
  std::uint64_t prefill_steps = 5000;
  std::uint64_t train_steps = 24500;
  double alpha_start = 0.4;
  double alpha_end = 0.2;
  std::size_t buffer_capacity = 1000000;
  std::uint64_t eval_every = 5000;
  std::string phase = "finetuned";
  // Fine-tuning prefills with the pre-trained policy plus noise; training a
  // behaviour policy from scratch prefills with uniform random actions for
  // state coverage, as in the usual TD3 warm-up.
  bool uniform_random_prefill = false;
};

RunLog train_online(RunState& run, const Hyperparams& hp, const OnlineLoopConfig& cfg,
                    const TrainSetup& setup, ReplayBuffer* buffer_out = nullptr,
                    const TrainHooks* hooks = nullptr);

}  // namespace refinerl
