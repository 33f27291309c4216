#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "refinerl/agent.hpp"
#include "refinerl/env.hpp"

namespace refinerl {

struct EvalReport {
  std::string env;
  std::vector<double> returns;
  double mean = 0.0;
  double stddev = 0.0;  // population standard deviation
  std::size_t episodes = 0;
  std::uint64_t seed = 0;
};

// Deterministic (sigma = 0) evaluation. Episode i resets the environment
// with derive_seed(seed, i), so adding episodes never shifts existing ones.
EvalReport evaluate_policy(const AgentParams& agent, const EnvSpec& spec, const NormStats& stats,
                           std::size_t episodes, std::uint64_t seed);

// 100 * (raw - random) / (expert - random); unbounded on both sides.
double normalized_score(double raw_return, const ReferenceScores& refs);

struct AggregateReport {
  std::vector<EvalReport> per_seed;
  double mean = 0.0;
  double stddev = 0.0;
  double normalized_mean = 0.0;
  double normalized_std = 0.0;
};

// Pools every episode of every report; raw and normalised statistics use the
// population standard deviation. Throws on reports from different
// environments.
AggregateReport aggregate(const std::vector<EvalReport>& reports, const ReferenceScores& refs);

}  // namespace refinerl
