#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "refinerl/dataset.hpp"
#include "refinerl/suite.hpp"
#include "refinerl/training.hpp"

namespace refinerl {

// ---------------------------------------------------------------------------
// Hashing (run ids, parameter-freeze assertions)

std::string sha256_hex(std::span<const unsigned char> bytes);
std::string sha256_hex(const std::string& text);

// f64 image of a network's parameters in serialization order (layer by
// layer, weights row-major then biases); used to assert bit-equality.
std::vector<unsigned char> network_bytes(const MlpParams& params);

// ---------------------------------------------------------------------------
// Dataset files
//
// Binary, little-endian: magic "OFRLDS01", u32 obs_dim, u32 act_dim,
// u64 count, then per record obs_dim f32 state, act_dim f32 action,
// f32 reward, obs_dim f32 next state, u8 terminal. A text sidecar with the
// same basename and a ".meta" extension carries env, level, seed and the
// generator parameters as key=value lines.

void save_dataset(const std::filesystem::path& path, const TransitionDataset& dataset);
TransitionDataset load_dataset(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Checkpoints
//
// Binary, little-endian, magic "TD3BCKP1", format version 1. Holds the run
// header (env, phase, seed, global step, alpha), dimensions, normalisation
// statistics (f64), the generator state so a later phase continues the same
// stream, the six networks in the fixed order critic1, critic2, actor,
// target_critic1, target_critic2, target_actor (per layer weights row-major
// then biases, f32) and the three Adam states (step count, rate, betas,
// epsilon, then first/second moments, f32).

// hidden_dim and action_bound are filled on load; saving derives both from
// the stored networks so the header cannot drift from the payload.
struct Checkpoint {
  std::string env;
  std::size_t hidden_dim = 256;
  double action_bound = 1.0;
  RunState run;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Reference score files (text, key=value)

void save_reference_scores(const std::filesystem::path& path, const ReferenceScores& refs);
ReferenceScores load_reference_scores(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Run configuration
//
// Flat key=value text with '#' comments. Every field has a default; unknown
// keys are rejected; write_config(parse_config(text)) is lossless.

struct RunConfig {
  std::string env = "pointmass";
  std::string dataset;     // transition file consumed by train/refine/ablate
  std::string refs;        // reference-score file
  std::string out = ".";
  std::string checkpoint;  // input checkpoint ("{seed}" expands per seed)
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};

  Hyperparams hp;
  OfflineSchedule offline;
  FinetuneSchedule finetune;
  AblationMode ablation = AblationMode::none;

  std::size_t hidden_dim = 256;
  std::size_t eval_episodes = 10;

  SuiteConfig suite;  // expert_n / medium_n / behaviour-training knobs
};

RunConfig parse_config_text(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);
std::string write_config_text(const RunConfig& config);

// Shortest text that parses back to exactly the same double.
std::string format_double(double value);

// ---------------------------------------------------------------------------
// CSV emission

// Header: step,phase,seed,alpha,mean_return,std_return,normalized_score
void write_curves_csv(const std::filesystem::path& path, const RunLog& log);

struct ResultsRow {
  std::string run_id;
  std::string env;
  std::string phase;
  std::string seeds;  // semicolon-separated
  std::size_t episodes_per_seed = 0;
  double mean_return = 0.0;
  double std_return = 0.0;
  double normalized_mean = 0.0;
  double normalized_std = 0.0;
};

// Appends one row, writing the header first when the file does not exist.
void append_results_row(const std::filesystem::path& path, const ResultsRow& row);

}  // namespace refinerl
