#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "refinerl/agent.hpp"

using namespace refinerl;

namespace {

bool same_network(const MlpParams& a, const MlpParams& b) {
  for (std::size_t l = 0; l < a.layer_count(); ++l) {
    if (a.weights[l].data != b.weights[l].data) return false;
    if (a.biases[l] != b.biases[l]) return false;
  }
  return true;
}

AgentParams tiny_agent(Rng& rng, const Hyperparams& hp, std::size_t obs = 3, std::size_t act = 2,
                       std::size_t hidden = 6, double bound = 1.0) {
  return make_agent(obs, act, hidden, bound, hp, rng);
}

Batch random_batch(Rng& rng, std::size_t n, std::size_t obs, std::size_t act, double bound) {
  Batch batch;
  batch.states = RealMatrix(n, obs);
  batch.actions = RealMatrix(n, act);
  batch.next_states = RealMatrix(n, obs);
  batch.rewards.resize(n);
  batch.terminal.resize(n);
  for (double& v : batch.states.data) v = rng.uniform(-1.5, 1.5);
  for (double& v : batch.actions.data) v = rng.uniform(-bound, bound);
  for (double& v : batch.next_states.data) v = rng.uniform(-1.5, 1.5);
  for (double& v : batch.rewards) v = rng.uniform(-2.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) batch.terminal[i] = rng.next_double() < 0.2 ? 1.0 : 0.0;
  return batch;
}

void zero_network(MlpParams& net) {
  for (auto& w : net.weights) std::fill(w.data.begin(), w.data.end(), 0.0);
  for (auto& b : net.biases) std::fill(b.begin(), b.end(), 0.0);
}

// zero everywhere except the final bias, so the net is the constant c
void make_constant_critic(MlpParams& net, double c) {
  zero_network(net);
  net.biases[2][0] = c;
}

double relative_error(double got, double want) {
  const double scale = std::max({std::abs(got), std::abs(want), 1e-6});
  return std::abs(got - want) / scale;
}

template <typename ValueFn>
void check_gradient_fd(MlpParams& net, const GradientBundle& grads, const ValueFn& value,
                       double h, double tol) {
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    for (std::size_t idx = 0; idx < net.weights[l].data.size(); ++idx) {
      double& p = net.weights[l].data[idx];
      const double saved = p;
      p = saved + h;
      const double up = value();
      p = saved - h;
      const double down = value();
      p = saved;
      CHECK(relative_error(grads.weights[l].data[idx], (up - down) / (2.0 * h)) <= tol);
    }
    for (std::size_t idx = 0; idx < net.biases[l].size(); ++idx) {
      double& p = net.biases[l][idx];
      const double saved = p;
      p = saved + h;
      const double up = value();
      p = saved - h;
      const double down = value();
      p = saved;
      CHECK(relative_error(grads.biases[l][idx], (up - down) / (2.0 * h)) <= tol);
    }
  }
}

}  // namespace

TEST_CASE("target_action with zero policy noise is the target actor output") {
  Rng rng(1);
  Hyperparams hp;
  hp.policy_noise = 0.0;
  const AgentParams agent = tiny_agent(rng, hp);
  Batch batch = random_batch(rng, 5, 3, 2, 1.0);
  Rng noise(2);
  const RealMatrix got = target_action(agent, batch.next_states, hp, noise);
  const RealMatrix want = actor_forward(agent.target_actor, batch.next_states);
  CHECK(got.data == want.data);
}

TEST_CASE("smoothing noise is clipped before adding, the sum after") {
  Rng rng(2);
  Hyperparams hp;
  hp.policy_noise = 1e6;  // every draw lands outside +-0.5 and clips
  hp.noise_clip = 0.5;
  AgentParams agent = tiny_agent(rng, hp, 3, 1, 6, 1.0);
  zero_network(agent.target_actor);
  // constant head: pi'(s') = tanh(atanh(0.9)) = 0.9
  agent.target_actor.biases[2][0] = std::atanh(0.9);

  Batch batch = random_batch(rng, 64, 3, 1, 1.0);
  Rng noise(3);
  const RealMatrix got = target_action(agent, batch.next_states, hp, noise);
  bool saw_upper = false, saw_lower = false;
  for (double a : got.data) {
    // 0.9 - 0.5 = 0.4, or 0.9 + 0.5 clipped to the bound 1.0
    const bool lower = std::abs(a - 0.4) < 1e-12;
    const bool upper = a == 1.0;
    CHECK((lower || upper));
    saw_lower = saw_lower || lower;
    saw_upper = saw_upper || upper;
  }
  CHECK(saw_lower);
  CHECK(saw_upper);
}

TEST_CASE("terminal transitions mask the bootstrap entirely") {
  Rng rng(4);
  Hyperparams hp;
  AgentParams agent = tiny_agent(rng, hp);
  make_constant_critic(agent.target_critic1, 100.0);
  make_constant_critic(agent.target_critic2, 200.0);
  Batch batch = random_batch(rng, 4, 3, 2, 1.0);
  batch.rewards = {1.0, 1.0, 1.0, 1.0};
  batch.terminal = {1.0, 1.0, 1.0, 1.0};
  Rng noise(5);
  const std::vector<double> y = critic_targets(agent, batch, hp, noise);
  for (double v : y) CHECK(v == 1.0);
}

TEST_CASE("twin-min bootstrap: constant critics 2 and 3 give y = 2.98") {
  Rng rng(6);
  Hyperparams hp;  // gamma = 0.99
  AgentParams agent = tiny_agent(rng, hp);
  make_constant_critic(agent.target_critic1, 2.0);
  make_constant_critic(agent.target_critic2, 3.0);
  Batch batch = random_batch(rng, 3, 3, 2, 1.0);
  batch.rewards = {1.0, 1.0, 1.0};
  batch.terminal = {0.0, 0.0, 0.0};
  Rng noise(7);
  const std::vector<double> y = critic_targets(agent, batch, hp, noise);
  for (double v : y) CHECK(v == doctest::Approx(2.98).epsilon(1e-15));
}

TEST_CASE("bootstrap never exceeds either target critic estimate") {
  Rng rng(8);
  Hyperparams hp;
  AgentParams agent = tiny_agent(rng, hp);
  Batch batch = random_batch(rng, 32, 3, 2, 1.0);
  Rng noise_a(9), noise_b(9);
  const std::vector<double> y = critic_targets(agent, batch, hp, noise_a);
  const RealMatrix a_next = target_action(agent, batch.next_states, hp, noise_b);
  const std::vector<double> q1 = critic_forward(agent.target_critic1, batch.next_states, a_next);
  const std::vector<double> q2 = critic_forward(agent.target_critic2, batch.next_states, a_next);
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double bound1 = batch.rewards[i] + hp.gamma * (1.0 - batch.terminal[i]) * q1[i];
    const double bound2 = batch.rewards[i] + hp.gamma * (1.0 - batch.terminal[i]) * q2[i];
    CHECK(y[i] <= bound1 + 1e-12);
    CHECK(y[i] <= bound2 + 1e-12);
  }
}

TEST_CASE("y has zero gradient in the online parameters") {
  Rng rng(10);
  Hyperparams hp;
  AgentParams agent = tiny_agent(rng, hp);
  Batch batch = random_batch(rng, 8, 3, 2, 1.0);
  Rng noise_a(11), noise_b(11);
  const std::vector<double> before = critic_targets(agent, batch, hp, noise_a);
  for (auto& w : agent.critic1.weights) {
    for (double& v : w.data) v += 0.37;
  }
  for (auto& w : agent.actor.weights) {
    for (double& v : w.data) v -= 0.21;
  }
  const std::vector<double> after = critic_targets(agent, batch, hp, noise_b);
  CHECK(before == after);
}

TEST_CASE("non-finite targets are diagnosed") {
  Rng rng(12);
  Hyperparams hp;
  AgentParams agent = tiny_agent(rng, hp);
  Batch batch = random_batch(rng, 4, 3, 2, 1.0);
  batch.rewards[2] = std::numeric_limits<double>::infinity();
  Rng noise(13);
  CHECK_THROWS_AS(critic_targets(agent, batch, hp, noise), std::runtime_error);
}

TEST_CASE("critic loss gradient matches finite differences") {
  Rng rng(14);
  Hyperparams hp;
  AgentParams agent = tiny_agent(rng, hp);
  Batch batch = random_batch(rng, 8, 3, 2, 1.0);
  Rng noise(15);
  const std::vector<double> targets = critic_targets(agent, batch, hp, noise);
  const auto [loss, grads] = critic_loss_gradient(agent.critic1, batch, targets);
  CHECK(loss == doctest::Approx(critic_loss_value(agent.critic1, batch, targets)).epsilon(1e-15));
  check_gradient_fd(
      agent.critic1, grads, [&] { return critic_loss_value(agent.critic1, batch, targets); },
      1e-5, 1e-4);
}

TEST_CASE("normalize_q examples and the degenerate guard") {
  {
    const auto [q, mean_abs] = normalize_q(std::vector<double>{3.0, -3.0});
    CHECK(q == std::vector<double>{1.0, -1.0});
    CHECK(mean_abs == 3.0);
  }
  {
    const auto [q, mean_abs] = normalize_q(std::vector<double>{2.0, -4.0});
    CHECK(q[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    CHECK(q[1] == doctest::Approx(-4.0 / 3.0).epsilon(1e-15));
    CHECK(mean_abs == 3.0);
  }
  {
    const auto [q, mean_abs] = normalize_q(std::vector<double>{0.0, 0.0});
    CHECK(q == std::vector<double>{0.0, 0.0});
    CHECK(mean_abs == 0.0);
  }
  CHECK_THROWS_AS(normalize_q(std::vector<double>{}), std::invalid_argument);
}

TEST_CASE("actor objective gradient matches finite differences at frozen denominator") {
  Rng rng(16);
  Hyperparams hp;
  AgentParams agent = tiny_agent(rng, hp);
  Batch batch = random_batch(rng, 8, 3, 2, 1.0);
  const double alpha = 0.4;
  const auto [report, grads] = actor_objective_gradient(agent, batch, hp, alpha);
  const double denom = report.mean_abs_q < 1e-8 ? 1.0 : report.mean_abs_q;
  CHECK(report.actor_objective ==
        doctest::Approx(actor_objective_value(agent, batch, hp, alpha, denom)).epsilon(1e-12));
  check_gradient_fd(
      agent.actor, grads,
      [&] { return actor_objective_value(agent, batch, hp, alpha, denom); }, 1e-5, 1e-4);
}

TEST_CASE("with huge alpha the gradient is the behavioural-cloning direction") {
  Rng rng(18);
  Hyperparams hp;
  AgentParams agent = tiny_agent(rng, hp);
  Batch batch = random_batch(rng, 8, 3, 2, 1.0);
  const double alpha = 1e6;
  const auto [report_full, grads_full] = actor_objective_gradient(agent, batch, hp, alpha);
  Hyperparams bc_hp = hp;
  bc_hp.bc_only = true;
  const auto [report_bc, grads_bc] = actor_objective_gradient(agent, batch, bc_hp, alpha);

  double num = 0.0, den = 0.0;
  for (std::size_t l = 0; l < grads_full.weights.size(); ++l) {
    for (std::size_t i = 0; i < grads_full.weights[l].data.size(); ++i) {
      const double diff = grads_full.weights[l].data[i] - grads_bc.weights[l].data[i];
      num += diff * diff;
      den += grads_bc.weights[l].data[i] * grads_bc.weights[l].data[i];
    }
  }
  CHECK(std::sqrt(num / den) < 1e-3);  // Q-term contribution is negligible
  CHECK(report_full.bc_mse == report_bc.bc_mse);
}

TEST_CASE("a policy that mirrors the batch actions gets zero BC gradient") {
  Rng rng(20);
  Hyperparams hp;
  AgentParams agent = tiny_agent(rng, hp);
  Batch batch = random_batch(rng, 8, 3, 2, 1.0);
  batch.actions = actor_forward(agent.actor, batch.states);

  AgentParams with_bc = agent;
  AgentParams without_bc = agent;
  const UpdateReport r1 = actor_update(with_bc, batch, hp, 1e6);
  const UpdateReport r2 = actor_update(without_bc, batch, hp, 0.0);
  CHECK(r1.bc_mse == 0.0);
  CHECK(same_network(with_bc.actor, without_bc.actor));
}

TEST_CASE("actor updates never touch critics or targets; critic updates never touch the actor") {
  Rng rng(22);
  Hyperparams hp;
  AgentParams agent = tiny_agent(rng, hp);
  Batch batch = random_batch(rng, 8, 3, 2, 1.0);

  AgentParams before = agent;
  actor_update(agent, batch, hp, 0.4);
  CHECK(same_network(agent.critic1, before.critic1));
  CHECK(same_network(agent.critic2, before.critic2));
  CHECK(same_network(agent.target_critic1, before.target_critic1));
  CHECK(same_network(agent.target_critic2, before.target_critic2));
  CHECK(same_network(agent.target_actor, before.target_actor));
  CHECK_FALSE(same_network(agent.actor, before.actor));

  before = agent;
  Rng noise(23);
  critic_update(agent, batch, hp, noise);
  CHECK(same_network(agent.actor, before.actor));
  CHECK(same_network(agent.target_critic1, before.target_critic1));
  CHECK(same_network(agent.target_critic2, before.target_critic2));
  CHECK(same_network(agent.target_actor, before.target_actor));
  CHECK_FALSE(same_network(agent.critic1, before.critic1));
  CHECK_FALSE(same_network(agent.critic2, before.critic2));
}

TEST_CASE("q-normalisation makes the actor gradient scale invariant") {
  Rng rng(24);
  Hyperparams hp;
  AgentParams agent = tiny_agent(rng, hp);
  Batch batch = random_batch(rng, 8, 3, 2, 1.0);

  AgentParams scaled = agent;
  const double c = 7.0;
  for (double& v : scaled.critic1.weights[2].data) v *= c;
  for (double& v : scaled.critic1.biases[2]) v *= c;

  const std::vector<double> q = critic_forward(agent.critic1, batch.states,
                                               actor_forward(agent.actor, batch.states));
  const std::vector<double> qs = critic_forward(scaled.critic1, batch.states,
                                                actor_forward(scaled.actor, batch.states));
  const auto [qn, mean_abs] = normalize_q(q);
  const auto [qsn, mean_abs_s] = normalize_q(qs);
  CHECK(mean_abs_s == doctest::Approx(c * mean_abs).epsilon(1e-12));
  for (std::size_t i = 0; i < qn.size(); ++i) {
    CHECK(relative_error(qsn[i], qn[i]) <= 1e-10);
  }

  // The RL component of the actor gradient is invariant too (alpha = 0).
  const auto [r1, g1] = actor_objective_gradient(agent, batch, hp, 0.0);
  const auto [r2, g2] = actor_objective_gradient(scaled, batch, hp, 0.0);
  for (std::size_t l = 0; l < g1.weights.size(); ++l) {
    for (std::size_t i = 0; i < g1.weights[l].data.size(); ++i) {
      const double a = g1.weights[l].data[i];
      const double b = g2.weights[l].data[i];
      CHECK(std::abs(a - b) <= 1e-10 * std::max({std::abs(a), std::abs(b), 1e-3}));
    }
  }
}

TEST_CASE("with alpha 0 the dataset actions are irrelevant") {
  Rng rng(26);
  Hyperparams hp;
  AgentParams a = tiny_agent(rng, hp);
  AgentParams b = a;
  Batch batch = random_batch(rng, 8, 3, 2, 1.0);
  Batch junk = batch;
  for (double& v : junk.actions.data) v = -v * 0.371;
  actor_update(a, batch, hp, 0.0);
  actor_update(b, junk, hp, 0.0);
  CHECK(same_network(a.actor, b.actor));
}

TEST_CASE("delayed updates run the actor on every ratio-th call") {
  Rng rng(28);
  Hyperparams hp;
  hp.critic_to_actor_ratio = 2;
  AgentParams agent = tiny_agent(rng, hp);
  Batch batch = random_batch(rng, 8, 3, 2, 1.0);

  CHECK_FALSE(maybe_update_targets_and_actor(agent, batch, hp, 0.4).has_value());  // call 1
  CHECK(agent.actor_opt.step_count == 0);
  CHECK(maybe_update_targets_and_actor(agent, batch, hp, 0.4).has_value());  // call 2
  CHECK(agent.actor_opt.step_count == 1);
  CHECK_FALSE(maybe_update_targets_and_actor(agent, batch, hp, 0.4).has_value());  // call 3
  CHECK(maybe_update_targets_and_actor(agent, batch, hp, 0.4).has_value());  // call 4
  CHECK(agent.actor_opt.step_count == 2);
  CHECK(agent.update_counter == 4);
}

TEST_CASE("ratio 1 updates the actor every call; targets sync exactly on actor updates") {
  Rng rng(30);
  Hyperparams hp;
  hp.critic_to_actor_ratio = 1;
  AgentParams agent = tiny_agent(rng, hp);
  Batch batch = random_batch(rng, 8, 3, 2, 1.0);
  for (int call = 1; call <= 5; ++call) {
    const MlpParams target_before = agent.target_actor;
    CHECK(maybe_update_targets_and_actor(agent, batch, hp, 0.4).has_value());
    CHECK_FALSE(same_network(agent.target_actor, target_before));
  }
  CHECK(agent.actor_opt.step_count == 5);
}

TEST_CASE("100 gated calls at ratio 2 yield exactly 50 actor updates") {
  Rng rng(32);
  Hyperparams hp;
  hp.critic_to_actor_ratio = 2;
  AgentParams agent = tiny_agent(rng, hp);
  Batch batch = random_batch(rng, 8, 3, 2, 1.0);
  int target_syncs = 0;
  for (int call = 0; call < 100; ++call) {
    const MlpParams target_before = agent.target_actor;
    maybe_update_targets_and_actor(agent, batch, hp, 0.4);
    if (!same_network(agent.target_actor, target_before)) ++target_syncs;
  }
  CHECK(agent.actor_opt.step_count == 50);
  CHECK(target_syncs == 50);
}

TEST_CASE("select_action is deterministic at sigma 0 and clipped always") {
  Rng rng(34);
  Hyperparams hp;
  AgentParams agent = tiny_agent(rng, hp, 3, 2, 6, 0.7);
  const NormStats stats = NormStats::identity(3);
  const std::vector<double> state{0.2, -0.4, 1.0};
  Rng unused(0);
  const auto a = select_action(agent, state, stats, 0.0, unused);
  const auto b = select_action(agent, state, stats, 0.0, unused);
  CHECK(a == b);
  for (double v : a) CHECK(std::abs(v) <= 0.7);

  Rng noisy(35);
  for (int i = 0; i < 50; ++i) {
    const auto c = select_action(agent, state, stats, 0.5, noisy);
    for (double v : c) CHECK(std::abs(v) <= 0.7);
  }
}

TEST_CASE("exploration noise is exactly the generator's recorded draw") {
  Rng rng(36);
  Hyperparams hp;
  AgentParams agent = tiny_agent(rng, hp, 3, 2, 6, 5.0);
  const NormStats stats = NormStats::identity(3);
  const std::vector<double> state{0.1, 0.2, 0.3};

  Rng unused(0);
  const auto clean = select_action(agent, state, stats, 0.0, unused);
  Rng replay(99);
  const double n0 = replay.normal(0.0, 0.1);
  const double n1 = replay.normal(0.0, 0.1);
  Rng live(99);
  const auto noisy = select_action(agent, state, stats, 0.1, live);
  CHECK(noisy[0] == clean[0] + n0);
  CHECK(noisy[1] == clean[1] + n1);
}
