// Experiment orchestration: interleaved train/eval loops over independent
// seed replicas, metric aggregation and the CSV/manifest file formats.
#pragma once

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <future>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>
#include <openssl/evp.h>

#include "slatesim/agents.hpp"
#include "slatesim/env_io.hpp"
#include "slatesim/environment.hpp"

namespace slatesim {

struct ExperimentConfig {
  AgentConfig agent;
  long train_steps = 200000;
  long eval_episodes = 1000;
  long eval_every = 10000;
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5, 6};
  long window = 100;
  bool parallel = true;
  /// Training episodes start uniformly at random even when the
  /// environment pins a start state; evaluation always honors the pin.
  bool exploring_starts = true;
};

inline void validate(const ExperimentConfig& cfg) {
  validate(cfg.agent);
  if (cfg.train_steps < 0) throw ConfigError("experiment: train_steps must be non-negative");
  if (cfg.eval_episodes < 1) throw ConfigError("experiment: eval_episodes must be positive");
  if (cfg.eval_every < 1) throw ConfigError("experiment: eval_every must be positive");
  if (cfg.seeds.empty()) throw ConfigError("experiment: at least one seed required");
  if (cfg.window < 1) throw ConfigError("experiment: window must be positive");
}

struct EvalRow {
  long step = 0;
  std::uint64_t seed = 0;
  Real mean_return = 0.0;
  long episodes = 0;
};

struct StepAggregate {
  long step = 0;
  Real seed_mean = 0.0;
  Real seed_std = 0.0;   // population std across seeds
  Real moving_avg = 0.0; // window over the seed-mean series, truncated at the start
};

struct RunMetrics {
  std::vector<EvalRow> rows;              // sorted by (step, seed)
  std::vector<StepAggregate> aggregates;  // sorted by step
};

constexpr long kMaxEpisodeSteps = 100000;

/// Mean undiscounted episode return of the greedy policy on the raw
/// environment. Never touches the agent's parameters.
inline Real evaluate_policy(const SlateAgent& agent, const EnvironmentSpec& env,
                            long episodes, RandomSource& rng) {
  Real total = 0.0;
  for (long ep = 0; ep < episodes; ++ep) {
    StateId s = initial_state(env, rng);
    Real episode_return = 0.0;
    for (long t = 0; t < kMaxEpisodeSteps; ++t) {
      const Slate slate = act(agent, s, rng, Phase::kEval);
      const TransitionRecord rec = step(env, s, slate, rng);
      episode_return += rec.reward;
      if (rec.terminal) break;
      s = rec.next_state;
    }
    total += episode_return;
  }
  return total / static_cast<Real>(episodes);
}

struct ReplicaResult {
  std::vector<EvalRow> rows;
  SlateAgent agent;
};

/// One seed replica: train on the fatal-failure (and risk-transformed)
/// view, evaluate every eval_every steps on the raw environment.
inline ReplicaResult run_replica(const ExperimentConfig& cfg, const EnvironmentSpec& env,
                                 std::uint64_t seed) {
  RandomSource rng(seed);
  SlateAgent agent = make_agent(cfg.agent, env, rng);
  const auto train_env = wrap_risk_seeking(wrap_fatal_failure(env), cfg.agent.alpha);

  std::vector<EvalRow> rows;
  const auto eval_at = [&](long t) {
    RandomSource eval_rng(seed * 0x9e3779b97f4a7c15ULL + static_cast<std::uint64_t>(t) + 1);
    rows.push_back({t, seed, evaluate_policy(agent, env, cfg.eval_episodes, eval_rng),
                    cfg.eval_episodes});
  };

  const auto training_start = [&]() {
    if (cfg.exploring_starts) return state(rng.uniform_int(env.n_states));
    return initial_state(env, rng);
  };

  eval_at(0);
  StateId s = training_start();
  for (long t = 1; t <= cfg.train_steps; ++t) {
    const Slate slate = act(agent, s, rng, Phase::kTrain);
    const TransitionRecord rec = step(train_env, s, slate, rng);
    learn_step(agent, rec, rng);
    s = rec.terminal ? training_start() : rec.next_state;
    if (t % cfg.eval_every == 0) eval_at(t);
  }
  if (cfg.train_steps % cfg.eval_every != 0) eval_at(cfg.train_steps);
  return {std::move(rows), std::move(agent)};
}

/// Seed mean, across-seed std and windowed moving average per step.
inline std::vector<StepAggregate> aggregate(const std::vector<EvalRow>& rows, long window) {
  if (rows.empty()) throw ConfigError("aggregate: no rows");
  if (window < 1) throw ConfigError("aggregate: window must be positive");

  std::vector<long> steps;
  for (const auto& r : rows)
    if (steps.empty() || steps.back() != r.step) steps.push_back(r.step);
  std::sort(steps.begin(), steps.end());
  steps.erase(std::unique(steps.begin(), steps.end()), steps.end());

  std::vector<StepAggregate> out;
  out.reserve(steps.size());
  for (long s : steps) {
    Real sum = 0.0, sum_sq = 0.0;
    long n = 0;
    for (const auto& r : rows) {
      if (r.step != s) continue;
      sum += r.mean_return;
      sum_sq += r.mean_return * r.mean_return;
      ++n;
    }
    const Real mean = sum / static_cast<Real>(n);
    const Real variance = std::max(0.0, sum_sq / static_cast<Real>(n) - mean * mean);
    out.push_back({s, mean, std::sqrt(variance), 0.0});
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    const std::size_t lo = i + 1 >= static_cast<std::size_t>(window) ? i + 1 - window : 0;
    Real acc = 0.0;
    for (std::size_t j = lo; j <= i; ++j) acc += out[j].seed_mean;
    out[i].moving_avg = acc / static_cast<Real>(i - lo + 1);
  }
  return out;
}

/// Trains every seed replica (in parallel when configured; replicas are
/// independent and the result is order-insensitive) and aggregates. When
/// out_agents is given it receives the trained agents in seed order.
inline RunMetrics run_experiment(const ExperimentConfig& cfg, const EnvironmentSpec& env,
                                 std::vector<SlateAgent>* out_agents = nullptr) {
  validate(cfg);
  validate(env);

  RunMetrics metrics;
  const auto consume = [&](ReplicaResult result) {
    metrics.rows.insert(metrics.rows.end(), result.rows.begin(), result.rows.end());
    if (out_agents) out_agents->push_back(std::move(result.agent));
  };
  if (cfg.parallel && cfg.seeds.size() > 1) {
    std::vector<std::future<ReplicaResult>> futures;
    futures.reserve(cfg.seeds.size());
    for (std::uint64_t seed : cfg.seeds)
      futures.push_back(std::async(std::launch::async,
                                   [&cfg, &env, seed] { return run_replica(cfg, env, seed); }));
    for (auto& f : futures) consume(f.get());
  } else {
    for (std::uint64_t seed : cfg.seeds) consume(run_replica(cfg, env, seed));
  }

  std::sort(metrics.rows.begin(), metrics.rows.end(), [](const EvalRow& a, const EvalRow& b) {
    if (a.step != b.step) return a.step < b.step;
    return a.seed < b.seed;
  });
  metrics.aggregates = aggregate(metrics.rows, cfg.window);
  return metrics;
}

inline std::string format_real(Real x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

inline std::string metrics_to_csv(const RunMetrics& metrics) {
  std::unordered_map<long, const StepAggregate*> by_step;
  for (const auto& agg : metrics.aggregates) by_step[agg.step] = &agg;

  std::string out = "step,seed,mean_return,std_return,moving_avg\n";
  for (const auto& row : metrics.rows) {
    const StepAggregate& agg = *by_step.at(row.step);
    out += std::to_string(row.step) + "," + std::to_string(row.seed) + "," +
           format_real(row.mean_return) + "," + format_real(agg.seed_std) + "," +
           format_real(agg.moving_avg) + "\n";
  }
  return out;
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open for writing: " + path);
  out << content;
}

/// Hash of a file's content the way git would hash the blob.
inline std::string git_blob_sha1(const std::string& content) {
  std::string data = "blob " + std::to_string(content.size());
  data.push_back('\0');
  data += content;
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha1(), nullptr);
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xf]);
  }
  return out;
}

inline nlohmann::json to_json(const ExperimentConfig& cfg) {
  return {{"agent", to_json(cfg.agent)},
          {"train_steps", cfg.train_steps},
          {"eval_episodes", cfg.eval_episodes},
          {"eval_every", cfg.eval_every},
          {"seeds", cfg.seeds},
          {"window", cfg.window},
          {"exploring_starts", cfg.exploring_starts}};
}

/// The run manifest ties metrics to the exact configuration and the
/// content hash of the environment that produced them.
inline nlohmann::json run_manifest(const ExperimentConfig& cfg, const EnvironmentSpec& env,
                                   const std::string& env_source) {
  return {{"config", to_json(cfg)},
          {"environment_source", env_source},
          {"environment_hash", git_blob_sha1(environment_to_string(env))}};
}

}  // namespace slatesim
