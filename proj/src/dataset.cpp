#include "refinerl/dataset.hpp"

#include <cmath>
#include <stdexcept>

namespace refinerl {

std::string to_string(DatasetLevel level) {
  switch (level) {
    case DatasetLevel::expert: return "expert";
    case DatasetLevel::medium: return "medium";
    case DatasetLevel::medium_replay: return "medium_replay";
    case DatasetLevel::medium_expert: return "medium_expert";
  }
  throw std::logic_error("unreachable dataset level");
}

DatasetLevel dataset_level_from_string(const std::string& name) {
  if (name == "expert") return DatasetLevel::expert;
  if (name == "medium") return DatasetLevel::medium;
  if (name == "medium_replay") return DatasetLevel::medium_replay;
  if (name == "medium_expert") return DatasetLevel::medium_expert;
  throw std::invalid_argument("unknown dataset level: " + name);
}

void ReplayBuffer::push(Transition t) {
  if (capacity_ == 0) {
    throw std::invalid_argument("replay buffer capacity must be positive");
  }
  if (storage_.size() < capacity_) {
    storage_.push_back(std::move(t));
  } else {
    storage_[write_head_] = std::move(t);
  }
  write_head_ = (write_head_ + 1) % capacity_;
}

const Transition& ReplayBuffer::chronological(std::size_t i) const {
  if (storage_.size() < capacity_) {
    return storage_[i];
  }
  return storage_[(write_head_ + i) % capacity_];
}

NormStats NormStats::identity(std::size_t dim, double eps) {
  NormStats stats;
  stats.mu.assign(dim, 0.0);
  stats.sigma.assign(dim, 1.0 - eps);
  stats.eps_norm = eps;
  return stats;
}

NormStats compute_norm_stats(const TransitionDataset& dataset) {
  if (dataset.transitions.empty()) {
    throw std::invalid_argument("cannot compute statistics of an empty dataset");
  }
  const std::size_t dim = dataset.obs_dim;
  const auto n = static_cast<double>(dataset.size());
  NormStats stats;
  stats.mu.assign(dim, 0.0);
  stats.sigma.assign(dim, 0.0);
  for (const Transition& t : dataset.transitions) {
    for (std::size_t d = 0; d < dim; ++d) stats.mu[d] += t.state[d];
  }
  for (std::size_t d = 0; d < dim; ++d) stats.mu[d] /= n;
  for (const Transition& t : dataset.transitions) {
    for (std::size_t d = 0; d < dim; ++d) {
      const double diff = t.state[d] - stats.mu[d];
      stats.sigma[d] += diff * diff;
    }
  }
  for (std::size_t d = 0; d < dim; ++d) stats.sigma[d] = std::sqrt(stats.sigma[d] / n);
  return stats;
}

std::vector<double> normalize_state(const NormStats& stats, std::span<const double> s) {
  if (s.size() != stats.dim()) {
    throw std::invalid_argument("state dimension does not match normalisation statistics");
  }
  std::vector<double> out(s.size());
  for (std::size_t d = 0; d < s.size(); ++d) {
    out[d] = (s[d] - stats.mu[d]) / (stats.sigma[d] + stats.eps_norm);
  }
  return out;
}

namespace {

template <typename Source>
Batch sample_impl(const Source& source, std::size_t batch_size, Rng& rng,
                  const NormStats& stats) {
  const std::size_t n = source.size();
  if (n == 0) {
    throw std::invalid_argument("cannot sample from an empty transition source");
  }
  if (batch_size == 0) {
    throw std::invalid_argument("batch size must be at least 1");
  }
  const std::size_t obs_dim = source.at(0).state.size();
  const std::size_t act_dim = source.at(0).action.size();
  Batch batch;
  batch.states = RealMatrix(batch_size, obs_dim);
  batch.actions = RealMatrix(batch_size, act_dim);
  batch.next_states = RealMatrix(batch_size, obs_dim);
  batch.rewards.resize(batch_size);
  batch.terminal.resize(batch_size);
  for (std::size_t i = 0; i < batch_size; ++i) {
    const Transition& t = source.at(rng.next_index(n));
    for (std::size_t d = 0; d < obs_dim; ++d) {
      batch.states.at(i, d) = (t.state[d] - stats.mu[d]) / (stats.sigma[d] + stats.eps_norm);
      batch.next_states.at(i, d) =
          (t.next_state[d] - stats.mu[d]) / (stats.sigma[d] + stats.eps_norm);
    }
    for (std::size_t d = 0; d < act_dim; ++d) batch.actions.at(i, d) = t.action[d];
    batch.rewards[i] = t.reward;
    batch.terminal[i] = t.terminal ? 1.0 : 0.0;
  }
  return batch;
}

}  // namespace

Batch sample_minibatch(const TransitionDataset& source, std::size_t batch_size, Rng& rng,
                       const NormStats& stats) {
  return sample_impl(source, batch_size, rng, stats);
}

Batch sample_minibatch(const ReplayBuffer& source, std::size_t batch_size, Rng& rng,
                       const NormStats& stats) {
  return sample_impl(source, batch_size, rng, stats);
}

}  // namespace refinerl
