#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "refinerl/matrix.hpp"
#include "refinerl/rng.hpp"

namespace refinerl {

struct Transition {
  std::vector<double> state;
  std::vector<double> action;
  double reward = 0.0;
  std::vector<double> next_state;
  bool terminal = false;  // dynamics-driven end only; horizon timeouts stay false
};

enum class DatasetLevel { expert, medium, medium_replay, medium_expert };

std::string to_string(DatasetLevel level);
DatasetLevel dataset_level_from_string(const std::string& name);

struct DatasetMeta {
  std::string env;
  DatasetLevel level = DatasetLevel::expert;
  std::uint64_t seed = 0;
  std::string behavior;  // description of the generating policy
  std::vector<std::pair<std::string, std::string>> params;
};

// Fixed offline dataset D. States are stored raw; normalization happens at
// sampling and policy-query time.
struct TransitionDataset {
  DatasetMeta meta;
  std::size_t obs_dim = 0;
  std::size_t act_dim = 0;
  std::vector<Transition> transitions;

  std::size_t size() const { return transitions.size(); }
  const Transition& at(std::size_t i) const { return transitions[i]; }
};

// Growing online buffer R with overwrite-oldest ring semantics. Storage only
// grows as far as it has been filled, so a large capacity costs nothing
// until used.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {}

  void push(Transition t);

  std::size_t size() const { return storage_.size(); }
  std::size_t capacity() const { return capacity_; }
  std::size_t write_head() const { return write_head_; }

  const Transition& at(std::size_t slot) const { return storage_[slot]; }

  // i-th transition in insertion order (oldest first), valid after wrapping.
  const Transition& chronological(std::size_t i) const;

 private:
  std::size_t capacity_;
  std::size_t write_head_ = 0;
  std::vector<Transition> storage_;
};

struct NormStats {
  std::vector<double> mu;
  std::vector<double> sigma;  // population standard deviation, per dimension
  double eps_norm = 1e-3;

  std::size_t dim() const { return mu.size(); }

  // mu = 0, sigma = 1 - eps, so normalising is the identity map. Used when
  // training online from scratch, before any dataset statistics exist.
  static NormStats identity(std::size_t dim, double eps = 1e-3);
};

// Per-dimension mean and population std over the states s of D (s' excluded;
// next states are normalised with the same transform downstream).
NormStats compute_norm_stats(const TransitionDataset& dataset);

std::vector<double> normalize_state(const NormStats& stats, std::span<const double> s);

// Minibatch with states and next states already normalised.
struct Batch {
  RealMatrix states;
  RealMatrix actions;
  std::vector<double> rewards;
  RealMatrix next_states;
  std::vector<double> terminal;  // 1.0 where the transition ended the episode
};

Batch sample_minibatch(const TransitionDataset& source, std::size_t batch_size, Rng& rng,
                       const NormStats& stats);
Batch sample_minibatch(const ReplayBuffer& source, std::size_t batch_size, Rng& rng,
                       const NormStats& stats);

}  // namespace refinerl
