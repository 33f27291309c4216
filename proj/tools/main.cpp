#include <CLI11.hpp>

#include <atomic>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <functional>
#include <iostream>
#include <mutex>
#include <thread>
#include <vector>

#include "refinerl/io.hpp"

namespace fs = std::filesystem;
using namespace refinerl;

namespace {

int worker_limit() {
  if (const char* env = std::getenv("REFINE_RL_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

// Runs fn(i) for i in [0, n) on a bounded pool. Output ordering is the
// caller's job (index results by i), so thread scheduling never shows up in
// any file we write.
void run_parallel(std::size_t n, const std::function<void(std::size_t)>& fn) {
  const int limit = std::min<int>(worker_limit(), static_cast<int>(n));
  if (limit <= 1) {
    set_matmul_threads(worker_limit());
    for (std::size_t i = 0; i < n; ++i) fn(i);
    set_matmul_threads(1);
    return;
  }
  set_matmul_threads(1);
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> workers;
  std::exception_ptr failure;
  std::mutex failure_mutex;
  for (int w = 0; w < limit; ++w) {
    workers.emplace_back([&] {
      for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : workers) t.join();
  if (failure) std::rethrow_exception(failure);
}

std::string substitute_seed(std::string pattern, std::uint64_t seed) {
  const std::string token = "{seed}";
  const auto pos = pattern.find(token);
  if (pos != std::string::npos) {
    pattern.replace(pos, token.size(), std::to_string(seed));
  }
  return pattern;
}

RunConfig load_effective_config(const std::string& config_path, const std::string& seed_override,
                                const std::string& out_override,
                                const std::string& checkpoint_override) {
  RunConfig config = config_path.empty() ? RunConfig{} : load_config(config_path);
  if (!seed_override.empty()) {
    config.seeds = {std::stoull(seed_override)};
  }
  if (!out_override.empty()) config.out = out_override;
  if (!checkpoint_override.empty()) config.checkpoint = checkpoint_override;
  return config;
}

std::string run_id_for(const RunConfig& config) {
  // Fingerprint only the fields that define the experiment; file locations
  // are bookkeeping and must not change the run identity.
  RunConfig canonical = config;
  canonical.dataset.clear();
  canonical.refs.clear();
  canonical.out.clear();
  canonical.checkpoint.clear();
  std::string id = sha256_hex(write_config_text(canonical)).substr(0, 12);
  id += "-s";
  for (std::size_t i = 0; i < config.seeds.size(); ++i) {
    if (i) id += "_";
    id += std::to_string(config.seeds[i]);
  }
  return id;
}

std::string joined_seeds(const RunConfig& config) {
  std::string out;
  for (std::size_t i = 0; i < config.seeds.size(); ++i) {
    if (i) out += ";";
    out += std::to_string(config.seeds[i]);
  }
  return out;
}

TrainSetup make_setup(const RunConfig& config) {
  TrainSetup setup;
  setup.spec = env_spec(config.env);
  setup.hidden_dim = config.hidden_dim;
  setup.eval_episodes = config.eval_episodes;
  if (config.refs.empty()) {
    throw std::runtime_error("config needs a refs= entry (run gen-data first)");
  }
  setup.refs = load_reference_scores(config.refs);
  return setup;
}

TransitionDataset load_config_dataset(const RunConfig& config, const TrainSetup& setup) {
  if (config.dataset.empty()) {
    throw std::runtime_error("config needs a dataset= entry");
  }
  TransitionDataset dataset = load_dataset(config.dataset);
  if (dataset.obs_dim != setup.spec.obs_dim || dataset.act_dim != setup.spec.act_dim) {
    throw std::runtime_error("dataset dimensions do not match environment " + config.env);
  }
  return dataset;
}

// hidden_dim must describe the agent actually inside `run`: the config's
// width for fresh runs, the input checkpoint's width for continued ones.
void save_run_checkpoint(const RunConfig& config, const TrainSetup& setup, const RunState& run,
                         std::size_t hidden_dim, const std::string& name) {
  Checkpoint checkpoint;
  checkpoint.env = config.env;
  checkpoint.hidden_dim = hidden_dim;
  checkpoint.action_bound = setup.spec.action_bound;
  checkpoint.run = run;
  save_checkpoint(fs::path(config.out) / name, checkpoint);
}

void write_merged_curves(const RunConfig& config, const std::string& filename,
                         const std::vector<RunLog>& per_seed) {
  RunLog merged;
  for (const RunLog& log : per_seed) {
    merged.insert(merged.end(), log.begin(), log.end());
  }
  write_curves_csv(fs::path(config.out) / filename, merged);
}

Checkpoint load_seed_checkpoint(const RunConfig& config, std::uint64_t seed,
                                const std::string& default_pattern) {
  const std::string pattern = config.checkpoint.empty() ? default_pattern : config.checkpoint;
  const fs::path path = fs::path(substitute_seed(pattern, seed));
  Checkpoint checkpoint = load_checkpoint(path.is_absolute() || path.string().find('/') != std::string::npos
                                              ? path
                                              : fs::path(config.out) / path);
  if (checkpoint.env != config.env) {
    throw std::runtime_error("checkpoint env '" + checkpoint.env + "' does not match config env '" +
                             config.env + "'");
  }
  return checkpoint;
}

int cmd_gen_data(const RunConfig& config) {
  const EnvSpec spec = env_spec(config.env);
  fs::create_directories(config.out);
  Hyperparams hp = config.hp;
  set_matmul_threads(worker_limit());
  const SuiteResult suite = generate_suite(spec, config.seeds.front(), hp, config.suite);
  set_matmul_threads(1);
  const fs::path out(config.out);
  save_dataset(out / (config.env + "_expert.ds"), suite.expert);
  save_dataset(out / (config.env + "_medium.ds"), suite.medium);
  save_dataset(out / (config.env + "_medium_replay.ds"), suite.medium_replay);
  save_dataset(out / (config.env + "_medium_expert.ds"), suite.medium_expert);
  save_reference_scores(out / (config.env + "_refs.txt"), suite.refs);

  Checkpoint expert_ckpt{config.env, config.hidden_dim, spec.action_bound, suite.expert_run};
  save_checkpoint(out / "behavior_expert.ckpt", expert_ckpt);
  Checkpoint medium_ckpt{config.env, config.hidden_dim, spec.action_bound, suite.medium_run};
  save_checkpoint(out / "behavior_medium.ckpt", medium_ckpt);

  write_curves_csv(out / "curves_behavior.csv", suite.behavior_log);
  std::cout << "suite written to " << config.out << " (expert " << suite.expert.size()
            << ", medium " << suite.medium.size() << ", medium_replay "
            << suite.medium_replay.size() << ", medium_expert " << suite.medium_expert.size()
            << ")\n";
  std::cout << "refs: random " << format_double(suite.refs.random_return) << ", expert "
            << format_double(suite.refs.expert_return) << "\n";
  return 0;
}

int cmd_train(const RunConfig& config) {
  const TrainSetup setup = make_setup(config);
  const TransitionDataset dataset = load_config_dataset(config, setup);
  fs::create_directories(config.out);
  std::vector<RunLog> logs(config.seeds.size());
  std::atomic<bool> diverged{false};
  run_parallel(config.seeds.size(), [&](std::size_t i) {
    const std::uint64_t seed = config.seeds[i];
    RunState run = init_run(dataset, config.hp, setup, seed);
    try {
      logs[i] = train_offline(run, dataset, config.hp, config.offline, setup);
      save_run_checkpoint(config, setup, run, config.hidden_dim,
                          "baseline_seed" + std::to_string(seed) + ".ckpt");
    } catch (const std::exception& e) {
      diverged = true;
      save_run_checkpoint(config, setup, run, config.hidden_dim,
                          "baseline_seed" + std::to_string(seed) + ".partial.ckpt");
      std::cerr << "seed " << seed << " aborted at step " << run.global_step << ": " << e.what()
                << "\n";
    }
  });
  write_merged_curves(config, "curves_train.csv", logs);
  return diverged ? 1 : 0;
}

int cmd_refine(const RunConfig& config) {
  const TrainSetup setup = make_setup(config);
  const TransitionDataset dataset = load_config_dataset(config, setup);
  fs::create_directories(config.out);
  std::vector<RunLog> logs(config.seeds.size());
  std::atomic<bool> diverged{false};
  run_parallel(config.seeds.size(), [&](std::size_t i) {
    const std::uint64_t seed = config.seeds[i];
    Checkpoint checkpoint = load_seed_checkpoint(config, seed, "baseline_seed{seed}.ckpt");
    RunState& run = checkpoint.run;
    try {
      logs[i] = refine_policy(run, dataset, config.hp, config.offline, setup);
      save_run_checkpoint(config, setup, run, checkpoint.hidden_dim,
                          "refined_seed" + std::to_string(seed) + ".ckpt");
    } catch (const std::exception& e) {
      diverged = true;
      save_run_checkpoint(config, setup, run, checkpoint.hidden_dim,
                          "refined_seed" + std::to_string(seed) + ".partial.ckpt");
      std::cerr << "seed " << seed << " aborted at step " << run.global_step << ": " << e.what()
                << "\n";
    }
  });
  write_merged_curves(config, "curves_refine.csv", logs);
  return diverged ? 1 : 0;
}

int cmd_finetune(const RunConfig& config) {
  const TrainSetup setup = make_setup(config);
  fs::create_directories(config.out);
  std::vector<RunLog> logs(config.seeds.size());
  std::atomic<bool> diverged{false};
  run_parallel(config.seeds.size(), [&](std::size_t i) {
    const std::uint64_t seed = config.seeds[i];
    Checkpoint checkpoint = load_seed_checkpoint(config, seed, "refined_seed{seed}.ckpt");
    RunState& run = checkpoint.run;
    try {
      logs[i] = finetune_online(run, config.hp, config.finetune, setup, config.offline.eval_every);
      save_run_checkpoint(config, setup, run, checkpoint.hidden_dim,
                          "finetuned_seed" + std::to_string(seed) + ".ckpt");
    } catch (const std::exception& e) {
      diverged = true;
      save_run_checkpoint(config, setup, run, checkpoint.hidden_dim,
                          "finetuned_seed" + std::to_string(seed) + ".partial.ckpt");
      std::cerr << "seed " << seed << " aborted at step " << run.global_step << ": " << e.what()
                << "\n";
    }
  });
  write_merged_curves(config, "curves_finetune.csv", logs);
  return diverged ? 1 : 0;
}

int cmd_ablate(const RunConfig& config) {
  const TrainSetup setup = make_setup(config);
  const TransitionDataset dataset = load_config_dataset(config, setup);
  fs::create_directories(config.out);
  const std::string mode = to_string(config.ablation);
  std::vector<RunLog> logs(config.seeds.size());
  std::atomic<bool> diverged{false};
  run_parallel(config.seeds.size(), [&](std::size_t i) {
    const std::uint64_t seed = config.seeds[i];
    try {
      AblationResult result =
          run_ablation(config.ablation, dataset, config.hp, config.offline, setup, seed);
      logs[i] = std::move(result.log);
      save_run_checkpoint(config, setup, result.run, config.hidden_dim,
                          "ablate_" + mode + "_seed" + std::to_string(seed) + ".ckpt");
    } catch (const std::exception& e) {
      diverged = true;
      std::cerr << "seed " << seed << " aborted: " << e.what() << "\n";
    }
  });
  write_merged_curves(config, "curves_ablate_" + mode + ".csv", logs);
  return diverged ? 1 : 0;
}

int cmd_eval(const RunConfig& config) {
  const TrainSetup setup = make_setup(config);
  if (config.checkpoint.empty()) {
    throw std::runtime_error("eval needs --checkpoint (or checkpoint= in the config)");
  }
  fs::create_directories(config.out);
  std::vector<EvalReport> reports(config.seeds.size());
  std::vector<std::string> phases(config.seeds.size());
  run_parallel(config.seeds.size(), [&](std::size_t i) {
    const std::uint64_t seed = config.seeds[i];
    const Checkpoint checkpoint = load_seed_checkpoint(config, seed, config.checkpoint);
    phases[i] = checkpoint.run.phase;
    reports[i] = evaluate_policy(checkpoint.run.agent, setup.spec, checkpoint.run.stats,
                                 config.eval_episodes, seed);
  });
  const std::string phase = phases.front();
  const AggregateReport agg = aggregate(reports, setup.refs);
  std::cout << "env=" << config.env << " phase=" << phase << " seeds=" << joined_seeds(config)
            << " episodes_per_seed=" << config.eval_episodes << "\n";
  std::cout << "raw: " << format_double(agg.mean) << " +- " << format_double(agg.stddev) << "\n";
  std::cout << "normalized: " << format_double(agg.normalized_mean) << " +- "
            << format_double(agg.normalized_std) << "\n";

  ResultsRow row;
  row.run_id = run_id_for(config);
  row.env = config.env;
  row.phase = phase;
  row.seeds = joined_seeds(config);
  row.episodes_per_seed = config.eval_episodes;
  row.mean_return = agg.mean;
  row.std_return = agg.stddev;
  row.normalized_mean = agg.normalized_mean;
  row.normalized_std = agg.normalized_std;
  append_results_row(fs::path(config.out) / "results.csv", row);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"TD3-BC offline RL with policy refinement and online fine-tuning"};
  app.require_subcommand(1);

  std::string config_path, seed_override, out_override, checkpoint_override;
  app.add_option("--config", config_path, "key=value run configuration file")
      ->check(CLI::ExistingFile);
  app.add_option("--seed", seed_override, "override the config seed list with one seed");
  app.add_option("--out", out_override, "override the output directory");
  app.add_option("--checkpoint", checkpoint_override,
                 "input checkpoint path ({seed} expands per seed)");

  auto* gen = app.add_subcommand("gen-data", "generate the dataset suite for an environment");
  auto* train = app.add_subcommand("train", "offline TD3-BC baseline training");
  auto* refine = app.add_subcommand("refine", "policy refinement from baseline checkpoints");
  auto* finetune = app.add_subcommand("finetune", "online fine-tuning with BC decay");
  auto* ablate = app.add_subcommand("ablate", "run the configured ablation mode");
  auto* eval = app.add_subcommand("eval", "evaluate checkpoints and append to results.csv");

  CLI11_PARSE(app, argc, argv);

  try {
    const RunConfig config =
        load_effective_config(config_path, seed_override, out_override, checkpoint_override);
    if (gen->parsed()) return cmd_gen_data(config);
    if (train->parsed()) return cmd_train(config);
    if (refine->parsed()) return cmd_refine(config);
    if (finetune->parsed()) return cmd_finetune(config);
    if (ablate->parsed()) return cmd_ablate(config);
    if (eval->parsed()) return cmd_eval(config);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
