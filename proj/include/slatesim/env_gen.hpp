// Synthetic environment construction: random candidate graphs matching the
// published statistics, and a hand-built lure-vs-chain testbed.
#pragma once

#include <algorithm>
#include <numeric>
#include <string>

#include "slatesim/environment.hpp"
#include "slatesim/rng.hpp"

namespace slatesim {

struct GeneratorConfig {
  std::uint64_t seed = 1;
  long n_states = 200;
  long feature_dim = 16;
  long slate_size = 10;
  long min_out_degree = 1;
  long max_out_degree = 60;
  Real weight_min = 0.1;           // typical weight around 0.5
  Real weight_max = 1.0;
  Real fail_weight = 0.5;
  Real p_end_fail = 0.2;
  Real p_end_exec = 0.1;
  // Rewards are bimodal by default: most states pay little, a few pay a
  // lot, which is what separates myopic from long-term slate policies.
  Real high_reward_fraction = 0.1;
  Real low_reward_min = 0.0;
  Real low_reward_max = 1.0;
  Real high_reward_min = 1.0;
  Real high_reward_max = 10.0;
  // When positive, feature coordinate 0 carries this weight times the
  // state's normalized reward before the column is scaled to unit norm,
  // like production embeddings in which value varies smoothly with
  // position. Nearest-neighbor attention is only informative with some
  // such structure; 0 keeps features pure noise.
  Real reward_feature_weight = 0.0;
};

inline void validate(const GeneratorConfig& cfg) {
  if (cfg.n_states < 2) throw ConfigError("generator: n_states must be at least 2");
  if (cfg.feature_dim <= 0) throw ConfigError("generator: feature_dim must be positive");
  if (cfg.slate_size < 1) throw ConfigError("generator: slate_size must be at least 1");
  if (cfg.min_out_degree < 1 || cfg.max_out_degree > kMaxCandidates ||
      cfg.min_out_degree > cfg.max_out_degree)
    throw ConfigError("generator: out-degree range must lie within [1," +
                      std::to_string(kMaxCandidates) + "]");
  if (cfg.max_out_degree > cfg.n_states - 1)
    throw ConfigError("generator: max_out_degree exceeds n_states - 1");
  if (!(cfg.weight_min > 0.0) || cfg.weight_max < cfg.weight_min)
    throw ConfigError("generator: weight range must be positive");
  if (!(cfg.fail_weight > 0.0)) throw ConfigError("generator: fail_weight must be positive");
  if (cfg.p_end_fail < 0.0 || cfg.p_end_fail > 1.0 || cfg.p_end_exec < 0.0 ||
      cfg.p_end_exec > 1.0)
    throw ConfigError("generator: termination probabilities outside [0,1]");
  if (cfg.high_reward_fraction < 0.0 || cfg.high_reward_fraction > 1.0)
    throw ConfigError("generator: high_reward_fraction outside [0,1]");
  if (cfg.reward_feature_weight < 0.0)
    throw ConfigError("generator: reward_feature_weight must be non-negative");
}

/// Draws a random environment: per-state out-degree uniform in the
/// configured range, distinct non-self targets, weights uniform in
/// [weight_min, weight_max], unit-norm gaussian features. Deterministic
/// for a fixed rng state.
inline EnvironmentSpec generate_environment(const GeneratorConfig& cfg, RandomSource& rng) {
  validate(cfg);

  EnvironmentSpec env;
  env.n_states = cfg.n_states;
  env.feature_dim = cfg.feature_dim;
  env.slate_size = cfg.slate_size;
  env.fail_weight = cfg.fail_weight;
  env.p_end_fail = cfg.p_end_fail;
  env.p_end_exec = cfg.p_end_exec;

  env.rewards.resize(cfg.n_states);
  for (long s = 0; s < cfg.n_states; ++s) {
    if (rng.uniform() < cfg.high_reward_fraction)
      env.rewards[s] = rng.uniform(cfg.high_reward_min, cfg.high_reward_max);
    else
      env.rewards[s] = rng.uniform(cfg.low_reward_min, cfg.low_reward_max);
  }

  env.features.resize(cfg.feature_dim, cfg.n_states);
  const Real reward_scale = std::max({cfg.low_reward_max, cfg.high_reward_max, 1e-12});
  for (long s = 0; s < cfg.n_states; ++s) {
    for (long i = 0; i < cfg.feature_dim; ++i) env.features(i, s) = rng.normal();
    if (cfg.reward_feature_weight > 0.0)
      env.features(0, s) = cfg.reward_feature_weight * env.rewards[s] / reward_scale;
    const Real norm = env.features.col(s).norm();
    if (norm > 0.0) env.features.col(s) /= norm;
  }

  env.edges.resize(cfg.n_states);
  std::vector<ActionId> targets(cfg.n_states - 1);
  for (long s = 0; s < cfg.n_states; ++s) {
    long t = 0;
    for (long j = 0; j < cfg.n_states; ++j)
      if (j != s) targets[t++] = j;
    const long degree =
        cfg.min_out_degree + rng.uniform_int(cfg.max_out_degree - cfg.min_out_degree + 1);
    // partial Fisher-Yates: the first `degree` entries become the targets
    for (long i = 0; i < degree; ++i) {
      const long j = i + rng.uniform_int(static_cast<long>(targets.size()) - i);
      std::swap(targets[i], targets[j]);
    }
    auto& out = env.edges[s];
    out.reserve(degree);
    for (long i = 0; i < degree; ++i)
      out.push_back({targets[i], rng.uniform(cfg.weight_min, cfg.weight_max)});
    std::sort(out.begin(), out.end(),
              [](const Edge& a, const Edge& b) { return a.action < b.action; });
  }

  validate(env);
  return env;
}

inline EnvironmentSpec generate_environment(const GeneratorConfig& cfg) {
  RandomSource rng(cfg.seed);
  return generate_environment(cfg, rng);
}

/// Hand-built environment where every chain state offers an immediate
/// small lure or a zero-reward step toward a single large goal. The
/// myopically best action from the start is the lure. States 0..length-1
/// form the chain, state length+s is chain state s's private lure branch,
/// then goal and a zero-reward sink; one-hot features; episodes start at
/// chain state 0.
inline EnvironmentSpec chain_environment(long length, Real lure_reward, Real goal_reward) {
  if (length < 2) throw ConfigError("chain: length must be at least 2");
  if (!(lure_reward > 0.0) || goal_reward < lure_reward)
    throw ConfigError("chain: need 0 < lure_reward <= goal_reward");

  const long goal = 2 * length;
  const long sink = 2 * length + 1;
  const long n = 2 * length + 2;

  EnvironmentSpec env;
  env.n_states = n;
  env.feature_dim = n;
  env.slate_size = 1;
  env.fail_weight = 0.01;  // tiny next to the unit edge weights, so eval teleports stay rare
  env.p_end_fail = 0.2;
  env.p_end_exec = 0.1;
  env.initial_state = 0;
  env.rewards = Vec::Zero(n);
  env.rewards[goal] = goal_reward;
  env.features = Mat::Identity(n, n);
  env.edges.resize(n);
  for (long s = 0; s < length; ++s) {
    const ActionId forward = (s + 1 < length) ? s + 1 : goal;
    const ActionId lure = length + s;
    env.rewards[lure] = lure_reward;
    env.edges[s] = {{std::min(forward, lure), 1.0}, {std::max(forward, lure), 1.0}};
    env.edges[lure] = {{sink, 1.0}};
  }
  env.edges[goal] = {{sink, 1.0}};
  env.edges[sink] = {{sink, 1.0}};

  validate(env);
  return env;
}

}  // namespace slatesim
