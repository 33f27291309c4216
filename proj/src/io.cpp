#include "refinerl/io.hpp"

#include <charconv>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace refinerl {

namespace {

// ----- little-endian byte packing ------------------------------------------

struct ByteWriter {
  std::vector<unsigned char> buf;

  void u8(std::uint8_t v) { buf.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<unsigned char>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf.push_back(static_cast<unsigned char>(v >> (8 * i)));
  }
  void f32(float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    u32(bits);
  }
  void f64(double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    u64(bits);
  }
  void text(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    buf.insert(buf.end(), s.begin(), s.end());
  }
};

struct ByteReader {
  std::span<const unsigned char> data;
  std::size_t pos = 0;

  void need(std::size_t n) const {
    if (pos + n > data.size()) throw std::runtime_error("truncated binary file");
  }
  std::uint8_t u8() {
    need(1);
    return data[pos++];
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(data[pos + i]) << (8 * i);
    pos += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(data[pos + i]) << (8 * i);
    pos += 8;
    return v;
  }
  float f32() {
    const std::uint32_t bits = u32();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }
  double f64() {
    const std::uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
  std::string text() {
    const std::uint32_t n = u32();
    need(n);
    std::string s(reinterpret_cast<const char*>(data.data() + pos), n);
    pos += n;
    return s;
  }
};

void write_file(const std::filesystem::path& path, std::span<const unsigned char> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  return bytes;
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out << text;
}

std::filesystem::path sidecar_path(const std::filesystem::path& path) {
  std::filesystem::path p = path;
  p.replace_extension(".meta");
  return p;
}

// ----- network blocks -------------------------------------------------------

void write_network_f32(ByteWriter& w, const MlpParams& net) {
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    for (double v : net.weights[l].data) w.f32(static_cast<float>(v));
    for (double v : net.biases[l]) w.f32(static_cast<float>(v));
  }
}

void read_network_f32(ByteReader& r, MlpParams& net) {
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    for (double& v : net.weights[l].data) v = static_cast<double>(r.f32());
    for (double& v : net.biases[l]) v = static_cast<double>(r.f32());
  }
}

void write_bundle_f32(ByteWriter& w, const GradientBundle& bundle) {
  for (std::size_t l = 0; l < bundle.weights.size(); ++l) {
    for (double v : bundle.weights[l].data) w.f32(static_cast<float>(v));
    for (double v : bundle.biases[l]) w.f32(static_cast<float>(v));
  }
}

void read_bundle_f32(ByteReader& r, GradientBundle& bundle) {
  for (std::size_t l = 0; l < bundle.weights.size(); ++l) {
    for (double& v : bundle.weights[l].data) v = static_cast<double>(r.f32());
    for (double& v : bundle.biases[l]) v = static_cast<double>(r.f32());
  }
}

void write_adam(ByteWriter& w, const AdamState& opt) {
  w.u64(opt.step_count);
  w.f64(opt.learning_rate);
  w.f64(opt.beta1);
  w.f64(opt.beta2);
  w.f64(opt.eps_adam);
  write_bundle_f32(w, opt.m);
  write_bundle_f32(w, opt.v);
}

void read_adam(ByteReader& r, AdamState& opt) {
  opt.step_count = r.u64();
  opt.learning_rate = r.f64();
  opt.beta1 = r.f64();
  opt.beta2 = r.f64();
  opt.eps_adam = r.f64();
  read_bundle_f32(r, opt.m);
  read_bundle_f32(r, opt.v);
}

MlpParams empty_net(std::vector<std::size_t> dims, OutputActivation act, double bound) {
  MlpParams net;
  net.layer_dims = std::move(dims);
  net.output_activation = act;
  net.bound = bound;
  for (std::size_t l = 0; l + 1 < net.layer_dims.size(); ++l) {
    net.weights.emplace_back(net.layer_dims[l], net.layer_dims[l + 1]);
    net.biases.emplace_back(net.layer_dims[l + 1], 0.0);
  }
  return net;
}

}  // namespace

std::vector<unsigned char> network_bytes(const MlpParams& params) {
  ByteWriter w;
  for (std::size_t l = 0; l < params.layer_count(); ++l) {
    for (double v : params.weights[l].data) w.f64(v);
    for (double v : params.biases[l]) w.f64(v);
  }
  return std::move(w.buf);
}

// ----- dataset files ---------------------------------------------------------

void save_dataset(const std::filesystem::path& path, const TransitionDataset& dataset) {
  ByteWriter w;
  for (char c : std::string("OFRLDS01")) w.u8(static_cast<std::uint8_t>(c));
  w.u32(static_cast<std::uint32_t>(dataset.obs_dim));
  w.u32(static_cast<std::uint32_t>(dataset.act_dim));
  w.u64(dataset.size());
  for (const Transition& t : dataset.transitions) {
    for (double v : t.state) w.f32(static_cast<float>(v));
    for (double v : t.action) w.f32(static_cast<float>(v));
    w.f32(static_cast<float>(t.reward));
    for (double v : t.next_state) w.f32(static_cast<float>(v));
    w.u8(t.terminal ? 1 : 0);
  }
  write_file(path, w.buf);

  std::ostringstream meta;
  meta << "env=" << dataset.meta.env << "\n";
  meta << "level=" << to_string(dataset.meta.level) << "\n";
  meta << "seed=" << dataset.meta.seed << "\n";
  meta << "behavior=" << dataset.meta.behavior << "\n";
  for (const auto& [key, value] : dataset.meta.params) {
    meta << key << "=" << value << "\n";
  }
  write_text_file(sidecar_path(path), meta.str());
}

TransitionDataset load_dataset(const std::filesystem::path& path) {
  const std::vector<unsigned char> bytes = read_file(path);
  ByteReader r{bytes};
  std::string magic;
  for (int i = 0; i < 8; ++i) magic.push_back(static_cast<char>(r.u8()));
  if (magic != "OFRLDS01") throw std::runtime_error("not a dataset file: " + path.string());
  TransitionDataset dataset;
  dataset.obs_dim = r.u32();
  dataset.act_dim = r.u32();
  const std::uint64_t count = r.u64();
  dataset.transitions.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    Transition t;
    t.state.resize(dataset.obs_dim);
    t.action.resize(dataset.act_dim);
    t.next_state.resize(dataset.obs_dim);
    for (double& v : t.state) v = static_cast<double>(r.f32());
    for (double& v : t.action) v = static_cast<double>(r.f32());
    t.reward = static_cast<double>(r.f32());
    for (double& v : t.next_state) v = static_cast<double>(r.f32());
    t.terminal = r.u8() != 0;
    dataset.transitions.push_back(std::move(t));
  }

  std::ifstream meta(sidecar_path(path));
  if (meta) {
    std::string line;
    while (std::getline(meta, line)) {
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      const std::string key = line.substr(0, eq);
      const std::string value = line.substr(eq + 1);
      if (key == "env") dataset.meta.env = value;
      else if (key == "level") dataset.meta.level = dataset_level_from_string(value);
      else if (key == "seed") dataset.meta.seed = std::stoull(value);
      else if (key == "behavior") dataset.meta.behavior = value;
      else dataset.meta.params.emplace_back(key, value);
    }
  }
  return dataset;
}

// ----- checkpoints -----------------------------------------------------------

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  const RunState& run = checkpoint.run;
  const AgentParams& agent = run.agent;
  ByteWriter w;
  for (char c : std::string("TD3BCKP1")) w.u8(static_cast<std::uint8_t>(c));
  w.u32(1);  // format version
  w.text(checkpoint.env);
  w.text(run.phase);
  w.u64(run.seed);
  w.u64(run.global_step);
  w.f64(run.alpha_at);
  w.u32(static_cast<std::uint32_t>(agent.actor.input_dim()));
  w.u32(static_cast<std::uint32_t>(agent.actor.output_dim()));
  // header width always describes the stored networks
  w.u32(static_cast<std::uint32_t>(agent.actor.layer_dims[1]));
  w.f64(agent.actor.bound);
  w.u32(static_cast<std::uint32_t>(run.stats.dim()));
  w.f64(run.stats.eps_norm);
  for (double v : run.stats.mu) w.f64(v);
  for (double v : run.stats.sigma) w.f64(v);
  for (std::uint64_t word : run.rng.state()) w.u64(word);
  w.u64(agent.update_counter);
  write_network_f32(w, agent.critic1);
  write_network_f32(w, agent.critic2);
  write_network_f32(w, agent.actor);
  write_network_f32(w, agent.target_critic1);
  write_network_f32(w, agent.target_critic2);
  write_network_f32(w, agent.target_actor);
  write_adam(w, agent.critic1_opt);
  write_adam(w, agent.critic2_opt);
  write_adam(w, agent.actor_opt);
  write_file(path, w.buf);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const std::vector<unsigned char> bytes = read_file(path);
  ByteReader r{bytes};
  std::string magic;
  for (int i = 0; i < 8; ++i) magic.push_back(static_cast<char>(r.u8()));
  if (magic != "TD3BCKP1") throw std::runtime_error("not a checkpoint file: " + path.string());
  const std::uint32_t version = r.u32();
  if (version != 1) {
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint checkpoint;
  RunState& run = checkpoint.run;
  checkpoint.env = r.text();
  run.phase = r.text();
  run.seed = r.u64();
  run.global_step = r.u64();
  run.alpha_at = r.f64();
  const std::size_t obs_dim = r.u32();
  const std::size_t act_dim = r.u32();
  checkpoint.hidden_dim = r.u32();
  checkpoint.action_bound = r.f64();
  const std::size_t stats_dim = r.u32();
  run.stats.eps_norm = r.f64();
  run.stats.mu.resize(stats_dim);
  run.stats.sigma.resize(stats_dim);
  for (double& v : run.stats.mu) v = r.f64();
  for (double& v : run.stats.sigma) v = r.f64();
  std::array<std::uint64_t, 4> rng_state{};
  for (std::uint64_t& word : rng_state) word = r.u64();
  run.rng.set_state(rng_state);

  AgentParams& agent = run.agent;
  agent.update_counter = r.u64();
  const std::vector<std::size_t> critic_dims{obs_dim + act_dim, checkpoint.hidden_dim,
                                             checkpoint.hidden_dim, 1};
  const std::vector<std::size_t> actor_dims{obs_dim, checkpoint.hidden_dim, checkpoint.hidden_dim,
                                            act_dim};
  agent.critic1 = empty_net(critic_dims, OutputActivation::identity, 1.0);
  agent.critic2 = empty_net(critic_dims, OutputActivation::identity, 1.0);
  agent.actor = empty_net(actor_dims, OutputActivation::tanh_scaled, checkpoint.action_bound);
  agent.target_critic1 = agent.critic1;
  agent.target_critic2 = agent.critic2;
  agent.target_actor = agent.actor;
  read_network_f32(r, agent.critic1);
  read_network_f32(r, agent.critic2);
  read_network_f32(r, agent.actor);
  read_network_f32(r, agent.target_critic1);
  read_network_f32(r, agent.target_critic2);
  read_network_f32(r, agent.target_actor);
  agent.critic1_opt = make_adam(agent.critic1, 3e-4);
  agent.critic2_opt = make_adam(agent.critic2, 3e-4);
  agent.actor_opt = make_adam(agent.actor, 3e-4);
  read_adam(r, agent.critic1_opt);
  read_adam(r, agent.critic2_opt);
  read_adam(r, agent.actor_opt);
  return checkpoint;
}

// ----- reference scores ------------------------------------------------------

void save_reference_scores(const std::filesystem::path& path, const ReferenceScores& refs) {
  std::ostringstream out;
  out << "env=" << refs.env << "\n";
  out << "random_return=" << format_double(refs.random_return) << "\n";
  out << "expert_return=" << format_double(refs.expert_return) << "\n";
  write_text_file(path, out.str());
}

ReferenceScores load_reference_scores(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open reference scores: " + path.string());
  ReferenceScores refs;
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);
    if (key == "env") refs.env = value;
    else if (key == "random_return") refs.random_return = std::stod(value);
    else if (key == "expert_return") refs.expert_return = std::stod(value);
  }
  if (!(refs.expert_return > refs.random_return)) {
    throw std::runtime_error("degenerate reference scores in " + path.string());
  }
  return refs;
}

// ----- configuration ---------------------------------------------------------

std::string format_double(double value) {
  char buf[64];
  const auto result = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, result.ptr);
}

namespace {

double parse_double(const std::string& key, const std::string& value) {
  double out = 0.0;
  const auto result = std::from_chars(value.data(), value.data() + value.size(), out);
  if (result.ec != std::errc() || result.ptr != value.data() + value.size()) {
    throw std::invalid_argument("config key '" + key + "' has a non-numeric value: " + value);
  }
  return out;
}

std::uint64_t parse_count(const std::string& key, const std::string& value) {
  std::uint64_t out = 0;
  const auto result = std::from_chars(value.data(), value.data() + value.size(), out);
  if (result.ec != std::errc() || result.ptr != value.data() + value.size()) {
    throw std::invalid_argument("config key '" + key + "' has a non-integer value: " + value);
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "1" || value == "true") return true;
  if (value == "0" || value == "false") return false;
  throw std::invalid_argument("config key '" + key + "' must be 0/1: " + value);
}

std::vector<std::uint64_t> parse_seed_list(const std::string& value) {
  std::vector<std::uint64_t> seeds;
  std::stringstream stream(value);
  std::string item;
  while (std::getline(stream, item, ',')) {
    if (item.empty()) continue;
    seeds.push_back(parse_count("seeds", item));
  }
  if (seeds.empty()) throw std::invalid_argument("config needs at least one seed");
  return seeds;
}

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

}  // namespace

RunConfig parse_config_text(const std::string& text) {
  RunConfig config;
  std::stringstream stream(text);
  std::string line;
  while (std::getline(stream, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line is not key=value: " + line);
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));

    if (key == "env") config.env = value;
    else if (key == "dataset") config.dataset = value;
    else if (key == "refs") config.refs = value;
    else if (key == "out") config.out = value;
    else if (key == "checkpoint") config.checkpoint = value;
    else if (key == "seeds") config.seeds = parse_seed_list(value);
    else if (key == "gamma") config.hp.gamma = parse_double(key, value);
    else if (key == "tau") config.hp.tau = parse_double(key, value);
    else if (key == "policy_noise") config.hp.policy_noise = parse_double(key, value);
    else if (key == "noise_clip") config.hp.noise_clip = parse_double(key, value);
    else if (key == "critic_to_actor_ratio") config.hp.critic_to_actor_ratio = parse_count(key, value);
    else if (key == "alpha") config.hp.alpha = parse_double(key, value);
    else if (key == "batch_size") config.hp.batch_size = parse_count(key, value);
    else if (key == "actor_lr") config.hp.actor_lr = parse_double(key, value);
    else if (key == "critic_lr") config.hp.critic_lr = parse_double(key, value);
    else if (key == "exploration_sigma") config.hp.exploration_sigma = parse_double(key, value);
    else if (key == "bc_only") config.hp.bc_only = parse_bool(key, value);
    else if (key == "offline_steps") config.offline.baseline_steps = parse_count(key, value);
    else if (key == "refine_steps") config.offline.refine_steps = parse_count(key, value);
    else if (key == "lambda") config.offline.lambda = parse_double(key, value);
    else if (key == "eval_every") config.offline.eval_every = parse_count(key, value);
    else if (key == "prefill_steps") config.finetune.prefill_steps = parse_count(key, value);
    else if (key == "decay_steps") config.finetune.decay_steps = parse_count(key, value);
    else if (key == "alpha_start") config.finetune.alpha_start = parse_double(key, value);
    else if (key == "alpha_end") config.finetune.alpha_end = parse_double(key, value);
    else if (key == "buffer_capacity") config.finetune.buffer_capacity = parse_count(key, value);
    else if (key == "ablation") config.ablation = ablation_mode_from_string(value);
    else if (key == "hidden_dim") config.hidden_dim = parse_count(key, value);
    else if (key == "eval_episodes") config.eval_episodes = parse_count(key, value);
    else if (key == "expert_n") config.suite.expert_n = parse_count(key, value);
    else if (key == "medium_n") config.suite.medium_n = parse_count(key, value);
    else if (key == "behavior_steps") config.suite.behavior_steps = parse_count(key, value);
    else if (key == "behavior_prefill") config.suite.behavior_prefill = parse_count(key, value);
    else if (key == "behavior_eval_every") config.suite.behavior_eval_every = parse_count(key, value);
    else throw std::invalid_argument("unknown config key: " + key);
  }
  config.suite.hidden_dim = config.hidden_dim;
  config.suite.buffer_capacity = config.finetune.buffer_capacity;
  config.suite.eval_episodes = config.eval_episodes;
  validate(config.hp);
  return config;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config: " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config_text(buffer.str());
}

std::string write_config_text(const RunConfig& config) {
  std::ostringstream out;
  out << "env=" << config.env << "\n";
  out << "dataset=" << config.dataset << "\n";
  out << "refs=" << config.refs << "\n";
  out << "out=" << config.out << "\n";
  out << "checkpoint=" << config.checkpoint << "\n";
  out << "seeds=";
  for (std::size_t i = 0; i < config.seeds.size(); ++i) {
    if (i) out << ",";
    out << config.seeds[i];
  }
  out << "\n";
  out << "gamma=" << format_double(config.hp.gamma) << "\n";
  out << "tau=" << format_double(config.hp.tau) << "\n";
  out << "policy_noise=" << format_double(config.hp.policy_noise) << "\n";
  out << "noise_clip=" << format_double(config.hp.noise_clip) << "\n";
  out << "critic_to_actor_ratio=" << config.hp.critic_to_actor_ratio << "\n";
  out << "alpha=" << format_double(config.hp.alpha) << "\n";
  out << "batch_size=" << config.hp.batch_size << "\n";
  out << "actor_lr=" << format_double(config.hp.actor_lr) << "\n";
  out << "critic_lr=" << format_double(config.hp.critic_lr) << "\n";
  out << "exploration_sigma=" << format_double(config.hp.exploration_sigma) << "\n";
  out << "bc_only=" << (config.hp.bc_only ? 1 : 0) << "\n";
  out << "offline_steps=" << config.offline.baseline_steps << "\n";
  out << "refine_steps=" << config.offline.refine_steps << "\n";
  out << "lambda=" << format_double(config.offline.lambda) << "\n";
  out << "eval_every=" << config.offline.eval_every << "\n";
  out << "prefill_steps=" << config.finetune.prefill_steps << "\n";
  out << "decay_steps=" << config.finetune.decay_steps << "\n";
  out << "alpha_start=" << format_double(config.finetune.alpha_start) << "\n";
  out << "alpha_end=" << format_double(config.finetune.alpha_end) << "\n";
  out << "buffer_capacity=" << config.finetune.buffer_capacity << "\n";
  out << "ablation=" << to_string(config.ablation) << "\n";
  out << "hidden_dim=" << config.hidden_dim << "\n";
  out << "eval_episodes=" << config.eval_episodes << "\n";
  out << "expert_n=" << config.suite.expert_n << "\n";
  out << "medium_n=" << config.suite.medium_n << "\n";
  out << "behavior_steps=" << config.suite.behavior_steps << "\n";
  out << "behavior_prefill=" << config.suite.behavior_prefill << "\n";
  out << "behavior_eval_every=" << config.suite.behavior_eval_every << "\n";
  return out.str();
}

// ----- CSV -------------------------------------------------------------------

void write_curves_csv(const std::filesystem::path& path, const RunLog& log) {
  std::ostringstream out;
  out << "step,phase,seed,alpha,mean_return,std_return,normalized_score\n";
  for (const RunLogRow& row : log) {
    out << row.global_step << "," << row.phase << "," << row.seed << ","
        << format_double(row.alpha) << "," << format_double(row.mean_return) << ","
        << format_double(row.std_return) << "," << format_double(row.normalized_score) << "\n";
  }
  write_text_file(path, out.str());
}

void append_results_row(const std::filesystem::path& path, const ResultsRow& row) {
  const bool fresh = !std::filesystem::exists(path);
  std::ofstream out(path, std::ios::app);
  if (!out) throw std::runtime_error("cannot open results file: " + path.string());
  if (fresh) {
    out << "run_id,env,phase,seeds,episodes_per_seed,mean_return,std_return,"
           "normalized_mean,normalized_std\n";
  }
  out << row.run_id << "," << row.env << "," << row.phase << "," << row.seeds << ","
      << row.episodes_per_seed << "," << format_double(row.mean_return) << ","
      << format_double(row.std_return) << "," << format_double(row.normalized_mean) << ","
      << format_double(row.normalized_std) << "\n";
}

}  // namespace refinerl
