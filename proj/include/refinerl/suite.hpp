#pragma once

#include <cstdint>

#include "refinerl/dataset.hpp"
#include "refinerl/env.hpp"
#include "refinerl/training.hpp"

namespace refinerl {

struct SuiteConfig {
  std::size_t expert_n = 50000;
  std::size_t medium_n = 50000;
  std::uint64_t behavior_steps = 20000;   // online TD3 training budget
  std::uint64_t behavior_prefill = 1000;
  std::uint64_t behavior_eval_every = 500;
  std::size_t hidden_dim = 256;
  std::size_t buffer_capacity = 1000000;
  std::size_t eval_episodes = 10;
};

struct SuiteResult {
  TransitionDataset expert;
  TransitionDataset medium;
  TransitionDataset medium_replay;
  TransitionDataset medium_expert;
  RunState expert_run;   // fully trained behaviour agent
  RunState medium_run;   // snapshot at roughly 1/3 of the expert's level
  ReferenceScores refs;
  RunLog behavior_log;
};

// Builds the four-level dataset suite for one environment:
//   1. trains a behaviour agent online with plain TD3 (alpha = 0, identity
//      state normalisation) for behavior_steps -> expert policy;
//   2. computes reference scores (uniform-random vs expert, 100 episodes);
//   3. picks the first evaluation checkpoint whose deterministic return
//      reaches random + (expert - random)/3 and replays training to that
//      step (runs are deterministic) -> medium policy and its live buffer;
//   4. expert / medium datasets are exploration-noise rollouts of the two
//      policies, cut to the requested sizes; medium_replay is the training
//      buffer at the snapshot; medium_expert is medium ++ expert.
// Throws if behaviour training never clears the medium threshold.
SuiteResult generate_suite(const EnvSpec& spec, std::uint64_t seed, const Hyperparams& hp,
                           const SuiteConfig& cfg);

}  // namespace refinerl
