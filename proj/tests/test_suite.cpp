#include <doctest.h>

#include <stdexcept>

#include "refinerl/io.hpp"
#include "refinerl/suite.hpp"

using namespace refinerl;

namespace {

// A deliberately small suite so the whole pipeline runs in under a minute.
SuiteConfig quick_config() {
  SuiteConfig cfg;
  cfg.expert_n = 2000;
  cfg.medium_n = 1500;
  cfg.behavior_steps = 6000;
  cfg.behavior_prefill = 1000;
  cfg.behavior_eval_every = 500;
  cfg.hidden_dim = 32;
  cfg.buffer_capacity = 100000;
  cfg.eval_episodes = 4;
  return cfg;
}

}  // namespace

TEST_CASE("suite generation builds all four levels with the documented structure") {
  const EnvSpec spec = env_spec("pointmass");
  Hyperparams hp;
  hp.batch_size = 64;
  const SuiteConfig cfg = quick_config();
  const SuiteResult suite = generate_suite(spec, 2024, hp, cfg);

  CHECK(suite.expert.size() == 2000);
  CHECK(suite.medium.size() == 1500);
  CHECK(suite.medium_expert.size() == 3500);

  // medium_expert is medium followed by expert, order preserved
  for (std::size_t i = 0; i < suite.medium.size(); ++i) {
    CHECK(suite.medium_expert.at(i).state == suite.medium.at(i).state);
    CHECK(suite.medium_expert.at(i).reward == suite.medium.at(i).reward);
  }
  for (std::size_t i = 0; i < suite.expert.size(); ++i) {
    const Transition& got = suite.medium_expert.at(suite.medium.size() + i);
    CHECK(got.state == suite.expert.at(i).state);
    CHECK(got.action == suite.expert.at(i).action);
  }

  CHECK(suite.expert.meta.level == DatasetLevel::expert);
  CHECK(suite.medium.meta.level == DatasetLevel::medium);
  CHECK(suite.medium_replay.meta.level == DatasetLevel::medium_replay);
  CHECK(suite.medium_expert.meta.level == DatasetLevel::medium_expert);
  for (const TransitionDataset* ds :
       {&suite.expert, &suite.medium, &suite.medium_replay, &suite.medium_expert}) {
    CHECK(ds->meta.env == "pointmass");
    CHECK(ds->obs_dim == 6);
    CHECK(ds->act_dim == 2);
    CHECK(ds->size() >= 1000);
  }

  CHECK(suite.refs.expert_return > suite.refs.random_return);
  CHECK(suite.expert_run.phase == "behavior_expert");
  CHECK(suite.medium_run.phase == "behavior_medium");

  // the medium snapshot is the buffer's origin: the replay dataset starts
  // with the earliest exploration transitions (prefill came first, ring
  // never wrapped at this scale)
  CHECK(suite.medium_replay.size() == cfg.behavior_prefill + suite.medium_run.global_step);

  // medium policy sits in the middle of the quality range: at least a third
  // of the gap (by construction), and clearly below the expert
  const double medium_return =
      evaluate_policy(suite.medium_run.agent, spec, suite.medium_run.stats, 10, 99).mean;
  const double expert_return =
      evaluate_policy(suite.expert_run.agent, spec, suite.expert_run.stats, 10, 99).mean;
  const double gap = suite.refs.expert_return - suite.refs.random_return;
  CHECK(medium_return >= suite.refs.random_return + gap / 3.0 - 0.15 * gap);
  CHECK(medium_return <= expert_return);

  // determinism: the same seed rebuilds the same suite
  const SuiteResult again = generate_suite(spec, 2024, hp, cfg);
  CHECK(again.expert.at(0).state == suite.expert.at(0).state);
  CHECK(again.medium_replay.size() == suite.medium_replay.size());
  CHECK(again.refs.random_return == suite.refs.random_return);
  CHECK(network_bytes(again.medium_run.agent.actor) ==
        network_bytes(suite.medium_run.agent.actor));

  // evaluating the expert agent against its own references scores near 100;
  // a freshly initialised agent scores near 0
  const double expert_score =
      normalized_score(expert_return, suite.refs);
  CHECK(expert_score >= 80.0);
  CHECK(expert_score <= 120.0);
  Rng init_rng(555);
  const AgentParams untrained = make_agent(spec.obs_dim, spec.act_dim, 16, spec.action_bound,
                                           hp, init_rng);
  // a near-zero-action untrained policy lands between the uniform-random
  // floor and the expert, far from 100
  const double untrained_score = normalized_score(
      evaluate_policy(untrained, spec, NormStats::identity(spec.obs_dim), 10, 3).mean,
      suite.refs);
  CHECK(untrained_score <= 55.0);
}

TEST_CASE("suite generation rejects undersized requests") {
  const EnvSpec spec = env_spec("pointmass");
  Hyperparams hp;
  SuiteConfig cfg = quick_config();
  cfg.expert_n = 10;
  CHECK_THROWS_AS(generate_suite(spec, 1, hp, cfg), std::invalid_argument);
}
