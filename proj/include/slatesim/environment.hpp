// Graph-based slate-MDP simulator: weighted candidate graph, position-
// discounted execution model, fatal-failure and risk-seeking wrappers.
#pragma once

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "slatesim/rng.hpp"
#include "slatesim/types.hpp"

namespace slatesim {

/// How slate position scales an action's execution weight. Slot 1 has
/// factor 1 in both modes. kDivide damps later slots (the information-
/// retrieval discount); kMultiply is the literal alternative reading and
/// makes later slots more likely.
enum class PositionDiscount { kDivide, kMultiply };

struct Edge {
  ActionId action = 0;
  Real weight = 0.0;
  bool operator==(const Edge&) const = default;
};

/// Everything that defines one slate-MDP instance: the weighted candidate
/// graph, per-state rewards and features, and the execution-model
/// constants. Immutable after construction; share freely across threads.
struct EnvironmentSpec {
  long n_states = 0;
  long feature_dim = 0;
  long slate_size = 1;
  Real fail_weight = 0.5;
  Real p_end_fail = 0.2;
  Real p_end_exec = 0.1;
  PositionDiscount position_discount = PositionDiscount::kDivide;
  /// Fixed episode start; episodes start uniformly at random when unset.
  std::optional<long> initial_state;
  Vec rewards;                          // entering state j pays rewards[j]
  Mat features;                         // feature_dim x n_states, one column per state
  std::vector<std::vector<Edge>> edges; // per state, ascending by action id
};

constexpr long kMaxCandidates = 60;

/// Checks every structural invariant; throws ConfigError with the
/// offending field on violation.
inline void validate(const EnvironmentSpec& env) {
  if (env.n_states <= 0) throw ConfigError("n_states must be positive");
  if (env.feature_dim <= 0) throw ConfigError("feature_dim must be positive");
  if (env.slate_size < 1) throw ConfigError("slate_size must be at least 1");
  if (!(env.fail_weight > 0.0)) throw ConfigError("fail_weight must be positive");
  if (env.p_end_fail < 0.0 || env.p_end_fail > 1.0) throw ConfigError("p_end_fail outside [0,1]");
  if (env.p_end_exec < 0.0 || env.p_end_exec > 1.0) throw ConfigError("p_end_exec outside [0,1]");
  if (env.rewards.size() != env.n_states) throw ConfigError("rewards size != n_states");
  if ((env.rewards.array() < 0.0).any() || !env.rewards.allFinite())
    throw ConfigError("rewards must be finite and non-negative");
  if (env.features.rows() != env.feature_dim || env.features.cols() != env.n_states)
    throw ConfigError("features must be feature_dim x n_states");
  if (!env.features.allFinite()) throw ConfigError("features must be finite");
  if (static_cast<long>(env.edges.size()) != env.n_states)
    throw ConfigError("edges size != n_states");
  if (env.initial_state && (*env.initial_state < 0 || *env.initial_state >= env.n_states))
    throw ConfigError("initial_state out of range");
  for (long s = 0; s < env.n_states; ++s) {
    const auto& out = env.edges[s];
    if (out.empty() || static_cast<long>(out.size()) > kMaxCandidates)
      throw ConfigError("state " + std::to_string(s) + " must have 1.." +
                        std::to_string(kMaxCandidates) + " candidate actions");
    for (std::size_t i = 0; i < out.size(); ++i) {
      if (out[i].action < 0 || out[i].action >= env.n_states)
        throw ConfigError("edge target out of range at state " + std::to_string(s));
      if (!(out[i].weight > 0.0) || !std::isfinite(out[i].weight))
        throw ConfigError("edge weight must be positive and finite");
      if (i > 0 && out[i].action <= out[i - 1].action)
        throw ConfigError("edges must be strictly ascending by action at state " +
                          std::to_string(s));
    }
  }
}

inline void check_state(const EnvironmentSpec& env, StateId s) {
  if (s.terminal) throw std::domain_error("operation undefined for the end state");
  if (s.index < 0 || s.index >= env.n_states)
    throw std::out_of_range("state index out of range");
}

inline void check_action(const EnvironmentSpec& env, ActionId a) {
  if (a < 0 || a >= env.n_states) throw std::out_of_range("action id out of range");
}

/// Actions with positive transition weight from s, ascending by id.
/// The end state has no candidates.
inline std::vector<ActionId> candidate_actions(const EnvironmentSpec& env, StateId s) {
  if (s.terminal) return {};
  check_state(env, s);
  std::vector<ActionId> out;
  out.reserve(env.edges[s.index].size());
  for (const Edge& e : env.edges[s.index]) out.push_back(e.action);
  return out;
}

/// Transition weight from s to a; zero when a is not a candidate.
inline Real edge_weight(const EnvironmentSpec& env, StateId s, ActionId a) {
  check_state(env, s);
  check_action(env, a);
  const auto& out = env.edges[s.index];
  auto it = std::lower_bound(out.begin(), out.end(), a,
                             [](const Edge& e, ActionId id) { return e.action < id; });
  return (it != out.end() && it->action == a) ? it->weight : 0.0;
}

/// Position factor for the 0-based slot, so slot 0 has factor 1.
inline Real position_factor(PositionDiscount mode, long slot) {
  const Real damp = std::log2(static_cast<Real>(slot) + 2.0);
  return mode == PositionDiscount::kDivide ? 1.0 / damp : damp;
}

/// Which action, if any, the environment executes for a presented slate.
struct ExecutionDistribution {
  std::vector<std::pair<ActionId, Real>> entries;  // deduped, positive-mass actions only
  Real fail_probability = 1.0;
};

inline Real probability_of(const ExecutionDistribution& dist, ActionId a) {
  for (const auto& [id, p] : dist.entries)
    if (id == a) return p;
  return 0.0;
}

/// Execution probabilities for a slate presented at s. Duplicates keep
/// their earliest (least damped) position; actions outside the candidate
/// set carry zero mass; the fail outcome carries fail_weight. Accepts any
/// slate length >= 1, which Algorithm-1-style training at slate size 1
/// relies on.
inline ExecutionDistribution execution_distribution(const EnvironmentSpec& env, StateId s,
                                                    const Slate& slate) {
  check_state(env, s);
  if (slate.empty()) throw std::invalid_argument("slate must not be empty");

  ExecutionDistribution dist;
  dist.entries.reserve(slate.size());
  std::vector<ActionId> seen;
  seen.reserve(slate.size());
  for (std::size_t slot = 0; slot < slate.size(); ++slot) {
    const ActionId a = slate[slot];
    check_action(env, a);
    if (std::find(seen.begin(), seen.end(), a) != seen.end()) continue;
    seen.push_back(a);
    const Real w = edge_weight(env, s, a);
    if (w <= 0.0) continue;
    dist.entries.emplace_back(a, w * position_factor(env.position_discount,
                                                     static_cast<long>(slot)));
  }

  Real total = env.fail_weight;
  for (const auto& [a, mass] : dist.entries) total += mass;
  for (auto& [a, mass] : dist.entries) mass /= total;
  dist.fail_probability = env.fail_weight / total;
  return dist;
}

/// Samples one transition. Executing a moves to state a with reward
/// rewards[a] and ends the episode with probability p_end_exec; the fail
/// outcome moves uniformly at random with reward of the landed state and
/// ends with probability p_end_fail.
inline TransitionRecord step(const EnvironmentSpec& env, StateId s, const Slate& slate,
                             RandomSource& rng) {
  const ExecutionDistribution dist = execution_distribution(env, s, slate);

  TransitionRecord rec;
  rec.state = s;
  rec.slate = slate;

  const Real u = rng.uniform();
  Real cum = 0.0;
  for (const auto& [a, p] : dist.entries) {
    cum += p;
    if (u < cum) {
      rec.executed = a;
      break;
    }
  }

  if (rec.executed) {
    rec.next_state = state(*rec.executed);
    rec.reward = env.rewards[*rec.executed];
    rec.terminal = rng.uniform() < env.p_end_exec;
  } else {
    rec.next_state = state(rng.uniform_int(env.n_states));
    rec.reward = env.rewards[rec.next_state.index];
    rec.terminal = rng.uniform() < env.p_end_fail;
  }
  return rec;
}

/// Training view in which a fail outcome ends the episode with zero
/// reward. Dynamics on executed outcomes are untouched (same rng stream).
struct FatalFailureEnv {
  const EnvironmentSpec& base;
};

inline FatalFailureEnv wrap_fatal_failure(const EnvironmentSpec& env) { return {env}; }

inline TransitionRecord step(const FatalFailureEnv& env, StateId s, const Slate& slate,
                             RandomSource& rng) {
  TransitionRecord rec = step(env.base, s, slate, rng);
  if (!rec.executed) {
    rec.reward = 0.0;
    rec.next_state = StateId::end();
    rec.terminal = true;
  }
  return rec;
}

/// r -> r^alpha, exact identity at alpha == 1 and at r == 0.
inline Real risk_transform(Real r, Real alpha) {
  if (alpha == 1.0 || r == 0.0) return r;
  return std::pow(r, alpha);
}

/// Training view that exponentiates every emitted reward. Evaluation
/// always runs on the unwrapped spec.
template <class Env>
struct RiskSeekingEnv {
  Env base;
  Real alpha = 1.0;
};

template <class Env>
RiskSeekingEnv<Env> wrap_risk_seeking(Env base, Real alpha) {
  if (!(alpha > 0.0)) throw ConfigError("risk exponent alpha must be positive");
  return {std::move(base), alpha};
}

template <class Env>
TransitionRecord step(const RiskSeekingEnv<Env>& env, StateId s, const Slate& slate,
                      RandomSource& rng) {
  TransitionRecord rec = step(env.base, s, slate, rng);
  rec.reward = risk_transform(rec.reward, env.alpha);
  return rec;
}

inline const EnvironmentSpec& spec_of(const EnvironmentSpec& env) { return env; }
inline const EnvironmentSpec& spec_of(const FatalFailureEnv& env) { return env.base; }
template <class Env>
const EnvironmentSpec& spec_of(const RiskSeekingEnv<Env>& env) {
  return spec_of(env.base);
}

/// Episode start state: the pinned one if the spec names it, else uniform.
inline StateId initial_state(const EnvironmentSpec& env, RandomSource& rng) {
  if (env.initial_state) return state(*env.initial_state);
  return state(rng.uniform_int(env.n_states));
}

/// Value-function input encoding: [state features | slot 1 features |
/// ... | slot l features], length feature_dim * (slate length + 1).
inline Vec slate_features(const EnvironmentSpec& env, StateId s, const Slate& slate) {
  check_state(env, s);
  const long d = env.feature_dim;
  Vec out(d * (static_cast<long>(slate.size()) + 1));
  out.head(d) = env.features.col(s.index);
  for (std::size_t i = 0; i < slate.size(); ++i) {
    check_action(env, slate[i]);
    out.segment(d * (static_cast<long>(i) + 1), d) = env.features.col(slate[i]);
  }
  return out;
}

}  // namespace slatesim
