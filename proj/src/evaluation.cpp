#include "refinerl/evaluation.hpp"

#include <cmath>
#include <stdexcept>

namespace refinerl {

namespace {

std::pair<double, double> mean_and_population_std(const std::vector<double>& values) {
  const auto n = static_cast<double>(values.size());
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  return {mean, std::sqrt(var / n)};
}

}  // namespace

EvalReport evaluate_policy(const AgentParams& agent, const EnvSpec& spec, const NormStats& stats,
                           std::size_t episodes, std::uint64_t seed) {
  if (episodes == 0) {
    throw std::invalid_argument("evaluation needs at least one episode");
  }
  EvalReport report;
  report.env = spec.name;
  report.episodes = episodes;
  report.seed = seed;
  Rng unused(0);  // sigma = 0 draws nothing
  for (std::size_t ep = 0; ep < episodes; ++ep) {
    EnvState state = env_reset(spec, derive_seed(seed, ep));
    double ep_return = 0.0;
    std::vector<double> obs = observe(spec, state);
    while (!state.done) {
      const std::vector<double> action = select_action(agent, obs, stats, 0.0, unused);
      const StepResult step = env_step(spec, state, action);
      ep_return += step.reward;
      obs = step.next_obs;
    }
    report.returns.push_back(ep_return);
  }
  std::tie(report.mean, report.stddev) = mean_and_population_std(report.returns);
  return report;
}

double normalized_score(double raw_return, const ReferenceScores& refs) {
  const double gap = refs.expert_return - refs.random_return;
  if (!(gap > 0.0)) {
    throw std::invalid_argument("degenerate reference scores (expert must exceed random)");
  }
  return 100.0 * (raw_return - refs.random_return) / gap;
}

AggregateReport aggregate(const std::vector<EvalReport>& reports, const ReferenceScores& refs) {
  if (reports.empty()) {
    throw std::invalid_argument("aggregate needs at least one report");
  }
  AggregateReport agg;
  std::vector<double> pooled;
  for (const EvalReport& r : reports) {
    if (r.env != reports.front().env) {
      throw std::invalid_argument("cannot aggregate reports from different environments");
    }
    pooled.insert(pooled.end(), r.returns.begin(), r.returns.end());
  }
  agg.per_seed = reports;
  std::tie(agg.mean, agg.stddev) = mean_and_population_std(pooled);
  const double gap = refs.expert_return - refs.random_return;
  agg.normalized_mean = normalized_score(agg.mean, refs);
  agg.normalized_std = 100.0 * agg.stddev / gap;
  return agg;
}

}  // namespace refinerl
