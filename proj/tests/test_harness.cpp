#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "slatesim/env_gen.hpp"
#include "slatesim/harness.hpp"

using namespace slatesim;

namespace {

EnvironmentSpec small_env() {
  GeneratorConfig cfg;
  cfg.seed = 2;
  cfg.n_states = 8;
  cfg.feature_dim = 2;
  cfg.slate_size = 2;
  cfg.max_out_degree = 4;
  return generate_environment(cfg);
}

ExperimentConfig tiny_experiment() {
  ExperimentConfig cfg;
  cfg.agent.kind = AgentKind::kFullSlate;
  cfg.agent.slate_size = 2;
  cfg.agent.batch_size = 4;
  cfg.agent.buffer_capacity = 64;
  cfg.train_steps = 60;
  cfg.eval_episodes = 5;
  cfg.eval_every = 30;
  cfg.seeds = {1, 2};
  cfg.window = 3;
  return cfg;
}

}  // namespace

TEST_CASE("hand-computed aggregation") {
  std::vector<EvalRow> rows{{0, 1, 2.0, 10}, {0, 3, 4.0, 10}};
  const auto agg = aggregate(rows, 100);
  REQUIRE(agg.size() == 1);
  CHECK(agg[0].seed_mean == doctest::Approx(3.0));
  CHECK(agg[0].seed_std == doctest::Approx(1.0));
  CHECK(agg[0].moving_avg == doctest::Approx(3.0));
}

TEST_CASE("a single seed has zero deviation") {
  std::vector<EvalRow> rows{{0, 1, 5.0, 10}, {10, 1, 7.0, 10}};
  const auto agg = aggregate(rows, 100);
  REQUIRE(agg.size() == 2);
  CHECK(agg[0].seed_std == 0.0);
  CHECK(agg[1].seed_std == 0.0);
}

TEST_CASE("a moving average of a constant series is that constant") {
  std::vector<EvalRow> rows;
  for (long t = 0; t < 10; ++t) rows.push_back({t, 1, 2.5, 10});
  for (const auto& agg : aggregate(rows, 100)) CHECK(agg.moving_avg == doctest::Approx(2.5));
}

TEST_CASE("the moving average window truncates at the series start") {
  std::vector<EvalRow> rows{{0, 1, 1.0, 1}, {1, 1, 3.0, 1}, {2, 1, 5.0, 1}, {3, 1, 7.0, 1}};
  const auto agg = aggregate(rows, 2);
  CHECK(agg[0].moving_avg == doctest::Approx(1.0));
  CHECK(agg[1].moving_avg == doctest::Approx(2.0));
  CHECK(agg[2].moving_avg == doctest::Approx(4.0));
  CHECK(agg[3].moving_avg == doctest::Approx(6.0));
}

TEST_CASE("experiments rerun to byte-identical metrics") {
  const EnvironmentSpec env = small_env();
  const ExperimentConfig cfg = tiny_experiment();
  const std::string a = metrics_to_csv(run_experiment(cfg, env));
  const std::string b = metrics_to_csv(run_experiment(cfg, env));
  CHECK(a == b);
  CHECK(a.rfind("step,seed,mean_return,std_return,moving_avg\n", 0) == 0);

  // parallel and serial replicas agree as well
  ExperimentConfig serial = cfg;
  serial.parallel = false;
  CHECK(metrics_to_csv(run_experiment(serial, env)) == a);
}

TEST_CASE("rows cover every seed at every evaluation block") {
  const EnvironmentSpec env = small_env();
  const ExperimentConfig cfg = tiny_experiment();
  const RunMetrics metrics = run_experiment(cfg, env);
  // evaluations at steps 0, 30 and 60 for both seeds
  REQUIRE(metrics.rows.size() == 6);
  CHECK(metrics.rows[0].step == 0);
  CHECK(metrics.rows[0].seed == 1);
  CHECK(metrics.rows[1].seed == 2);
  CHECK(metrics.rows.back().step == 60);
  CHECK(metrics.aggregates.size() == 3);
  for (const auto& row : metrics.rows) CHECK(row.episodes == 5);
}

TEST_CASE("evaluation leaves the agent parameters untouched") {
  const EnvironmentSpec env = small_env();
  AgentConfig cfg;
  cfg.kind = AgentKind::kDpgKnn;
  cfg.slate_size = 2;
  RandomSource rng(3);
  const SlateAgent agent = make_agent(cfg, env, rng);

  const std::string before = to_json(agent).dump();
  RandomSource eval_rng(4);
  (void)evaluate_policy(agent, env, 50, eval_rng);
  CHECK(to_json(agent).dump() == before);
}

TEST_CASE("training rewards respect the risk wrapper, evaluation does not") {
  // an agent trained with a large alpha still reports raw-scale returns
  EnvironmentSpec env = small_env();
  ExperimentConfig cfg = tiny_experiment();
  cfg.agent.alpha = 3.0;
  cfg.seeds = {5};
  const RunMetrics metrics = run_experiment(cfg, env);
  const Real max_reward = env.rewards.maxCoeff();
  for (const auto& row : metrics.rows) {
    // a raw-reward episode mean cannot exceed max reward times episode length bound
    CHECK(row.mean_return >= 0.0);
    CHECK(row.mean_return < std::pow(max_reward, 3.0) * 100.0);
  }
}

TEST_CASE("the environment hash matches git blob hashing") {
  // printf 'test\n' | git hash-object --stdin
  CHECK(git_blob_sha1("test\n") == "9daeafb9864cf43055ae93beb0afd6c7d144bfa4");
}

TEST_CASE("the manifest pins config, source and environment hash") {
  const EnvironmentSpec env = small_env();
  const ExperimentConfig cfg = tiny_experiment();
  const nlohmann::json manifest = run_manifest(cfg, env, "generated:seed=2");
  CHECK(manifest.at("environment_source") == "generated:seed=2");
  CHECK(manifest.at("environment_hash").get<std::string>().size() == 40);
  CHECK(manifest.at("config").at("seeds").get<std::vector<std::uint64_t>>() == cfg.seeds);
  CHECK(manifest.at("config").at("agent").at("gamma").get<Real>() == cfg.agent.gamma);
}

TEST_CASE("invalid configurations name the offending field") {
  const EnvironmentSpec env = small_env();
  ExperimentConfig cfg = tiny_experiment();
  cfg.eval_every = 0;
  CHECK_THROWS_WITH_AS(run_experiment(cfg, env),
                       "experiment: eval_every must be positive", ConfigError);
  cfg = tiny_experiment();
  cfg.agent.epsilon = 1.5;
  CHECK_THROWS_AS(run_experiment(cfg, env), ConfigError);
}
