// Exact ground truth for small instances: slate value iteration,
// exhaustive optimal-slate search, and certification of the structural
// properties (fatal failure, sequential presentation, monotonicity,
// submodularity) by enumeration.
#pragma once

#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "slatesim/environment.hpp"
#include "slatesim/rng.hpp"
#include "slatesim/types.hpp"

namespace slatesim {

/// Enumeration guard: instances above this many (state, slate) pairs are
/// refused rather than solved.
constexpr Real kMaxEnumeratedPairs = 1e6;

/// Weighted-graph environment viewed as an enumerable slate-MDP, with or
/// without the fatal-failure training modification.
struct GraphOracleModel {
  const EnvironmentSpec* env = nullptr;
  bool fatal_fail = false;
  std::vector<std::vector<ActionId>> acts;

  long state_count() const { return env->n_states; }
  long slate_size() const { return env->slate_size; }
  const std::vector<ActionId>& actions(long s) const { return acts[s]; }
  ExecutionDistribution execution(long s, const Slate& slate) const {
    return execution_distribution(*env, state(s), slate);
  }
  Real reward(long s) const { return env->rewards[s]; }
  Real p_end_exec() const { return env->p_end_exec; }
  Real p_end_fail() const { return env->p_end_fail; }
  bool fatal() const { return fatal_fail; }
};

inline GraphOracleModel oracle_model(const EnvironmentSpec& env, bool fatal_failure) {
  GraphOracleModel m{&env, fatal_failure, {}};
  m.acts.resize(env.n_states);
  for (long s = 0; s < env.n_states; ++s) m.acts[s] = candidate_actions(env, state(s));
  return m;
}

/// Tiny hand-specifiable slate-MDP with explicit conditional execution
/// tables: the state's occupant inspects distinct slate entries in order
/// and takes entry a with propensity q(s, a). Built to satisfy fatal
/// failure and sequential presentation exactly, so the greedy bound and
/// the submodularity proposition must hold on it.
struct CascadeSlateMdp {
  Mat propensity;  // n x n, entries in [0, 1); zero means not a candidate
  Vec state_rewards;
  Real end_prob = 0.1;
  long slate_len = 2;
  std::vector<std::vector<ActionId>> acts;

  long state_count() const { return propensity.rows(); }
  long slate_size() const { return slate_len; }
  const std::vector<ActionId>& actions(long s) const { return acts[s]; }
  Real reward(long s) const { return state_rewards[s]; }
  Real p_end_exec() const { return end_prob; }
  Real p_end_fail() const { return 1.0; }
  bool fatal() const { return true; }

  ExecutionDistribution execution(long s, const Slate& slate) const {
    ExecutionDistribution dist;
    Real surviving = 1.0;
    std::vector<ActionId> seen;
    for (ActionId a : slate) {
      if (std::find(seen.begin(), seen.end(), a) != seen.end()) continue;
      seen.push_back(a);
      const Real q = propensity(s, a);
      if (q <= 0.0) continue;
      dist.entries.emplace_back(a, surviving * q);
      surviving *= 1.0 - q;
    }
    dist.fail_probability = surviving;
    return dist;
  }
};

inline CascadeSlateMdp finalize_cascade(CascadeSlateMdp m) {
  m.acts.assign(m.state_count(), {});
  for (long s = 0; s < m.state_count(); ++s) {
    for (long a = 0; a < m.state_count(); ++a)
      if (m.propensity(s, a) > 0.0) m.acts[s].push_back(a);
    if (m.acts[s].empty())
      throw ConfigError("cascade: state " + std::to_string(s) + " has no candidates");
  }
  return m;
}

/// Random instance for property certification: n <= 6 states, slates up
/// to length 3, sparse propensities with at least one candidate per state.
inline CascadeSlateMdp random_cascade(RandomSource& rng, long max_states = 6,
                                      long max_slate = 3) {
  CascadeSlateMdp m;
  const long n = 2 + rng.uniform_int(max_states - 1);
  m.slate_len = 1 + rng.uniform_int(max_slate);
  m.end_prob = rng.uniform(0.0, 0.5);
  m.propensity = Mat::Zero(n, n);
  for (long s = 0; s < n; ++s) {
    for (long a = 0; a < n; ++a)
      if (rng.uniform() < 0.6) m.propensity(s, a) = rng.uniform(0.05, 0.9);
    if ((m.propensity.row(s).array() > 0.0).count() == 0)
      m.propensity(s, rng.uniform_int(n)) = rng.uniform(0.05, 0.9);
  }
  m.state_rewards.resize(n);
  for (long s = 0; s < n; ++s) m.state_rewards[s] = rng.uniform(0.0, 10.0);
  return finalize_cascade(m);
}

/// Calls fn with every ordered tuple (repetition allowed) of the given
/// length, in lexicographic order.
template <class Fn>
void for_each_slate(const std::vector<ActionId>& actions, long length, Fn&& fn) {
  if (actions.empty() || length <= 0) return;
  const long n = static_cast<long>(actions.size());
  std::vector<long> idx(length, 0);
  Slate slate(length, actions[0]);
  while (true) {
    for (long i = 0; i < length; ++i) slate[i] = actions[idx[i]];
    fn(const_cast<const Slate&>(slate));
    long pos = length - 1;
    while (pos >= 0 && ++idx[pos] == n) idx[pos--] = 0;
    if (pos < 0) break;
  }
}

/// Calls fn with every duplicate-free ordered tuple of length 0..max_len.
template <class Fn>
void for_each_distinct_prefix(const std::vector<ActionId>& actions, long max_len, Fn&& fn) {
  Slate prefix;
  auto recurse = [&](auto&& self) -> void {
    fn(const_cast<const Slate&>(prefix));
    if (static_cast<long>(prefix.size()) == max_len) return;
    for (ActionId a : actions) {
      if (std::find(prefix.begin(), prefix.end(), a) != prefix.end()) continue;
      prefix.push_back(a);
      self(self);
      prefix.pop_back();
    }
  };
  recurse(recurse);
}

struct ExactSolution {
  Vec v;  // optimal value per state; the end state is worth zero
  Real gamma = 1.0;
  Real tolerance = 1e-10;
};

/// One-step slate value under the model's execution distribution and the
/// given state values. Defined for partial slates, including the empty
/// one (pure fail).
template <class Model>
Real slate_value(const Model& m, const Vec& v, Real gamma, long s, const Slate& slate) {
  Real value = 0.0;
  Real fail_p = 1.0;
  if (!slate.empty()) {
    const ExecutionDistribution dist = m.execution(s, slate);
    for (const auto& [a, p] : dist.entries)
      value += p * (m.reward(a) + gamma * (1.0 - m.p_end_exec()) * v[a]);
    fail_p = dist.fail_probability;
  }
  if (!m.fatal() && fail_p > 0.0) {
    const long n = m.state_count();
    Real landing = 0.0;
    for (long t = 0; t < n; ++t)
      landing += m.reward(t) + gamma * (1.0 - m.p_end_fail()) * v[t];
    value += fail_p * landing / static_cast<Real>(n);
  }
  return value;
}

template <class Model>
Real enumerated_pairs(const Model& m) {
  Real pairs = 0.0;
  for (long s = 0; s < m.state_count(); ++s)
    pairs += std::pow(static_cast<Real>(m.actions(s).size()),
                      static_cast<Real>(m.slate_size()));
  return pairs;
}

/// Value iteration over the enumerated slate space until the sup-norm
/// change drops below tolerance. Refuses instances above the pair guard.
template <class Model>
ExactSolution exact_q(const Model& m, Real gamma, Real tolerance,
                      Real max_pairs = kMaxEnumeratedPairs) {
  if (gamma < 0.0 || gamma > 1.0) throw ConfigError("exact_q: gamma outside [0,1]");
  if (!(tolerance > 0.0)) throw ConfigError("exact_q: tolerance must be positive");
  const Real pairs = enumerated_pairs(m);
  if (pairs > max_pairs)
    throw OracleRefusal("instance has " + std::to_string(pairs) +
                        " (state, slate) pairs, refusing above " + std::to_string(max_pairs));

  const long n = m.state_count();
  Vec v = Vec::Zero(n);
  Vec next(n);
  constexpr long kMaxSweeps = 200000;
  for (long sweep = 0; sweep < kMaxSweeps; ++sweep) {
    for (long s = 0; s < n; ++s) {
      Real best = -std::numeric_limits<Real>::infinity();
      for_each_slate(m.actions(s), m.slate_size(), [&](const Slate& slate) {
        best = std::max(best, slate_value(m, v, gamma, s, slate));
      });
      next[s] = best;
    }
    const Real diff = (next - v).cwiseAbs().maxCoeff();
    v = next;
    if (diff < tolerance) return {v, gamma, tolerance};
  }
  throw OracleRefusal("value iteration did not converge; is the instance contractive?");
}

template <class Model>
Real exact_slate_value(const Model& m, const ExactSolution& sol, long s, const Slate& slate) {
  return slate_value(m, sol.v, sol.gamma, s, slate);
}

/// Exhaustive argmax over the full slate space; ties keep the
/// lexicographically smallest slate.
template <class Model>
std::pair<Slate, Real> optimal_slate(const Model& m, const ExactSolution& sol, long s) {
  Slate best_slate;
  Real best = -std::numeric_limits<Real>::infinity();
  for_each_slate(m.actions(s), m.slate_size(), [&](const Slate& slate) {
    const Real value = exact_slate_value(m, sol, s, slate);
    if (value > best) {
      best = value;
      best_slate = slate;
    }
  });
  return {best_slate, best};
}

/// All (slate, value) pairs for one state, lexicographic by slate.
template <class Model>
std::vector<std::pair<Slate, Real>> enumerate_q(const Model& m, const ExactSolution& sol,
                                                long s) {
  std::vector<std::pair<Slate, Real>> out;
  for_each_slate(m.actions(s), m.slate_size(), [&](const Slate& slate) {
    out.emplace_back(slate, exact_slate_value(m, sol, s, slate));
  });
  return out;
}

struct PropertyCheck {
  std::string name;
  bool pass = true;
  long cases = 0;
  long violations = 0;
  Real worst = 0.0;       // largest violation magnitude seen
  std::string witness;    // first violating tuple, if any
};

struct PropertyReport {
  std::vector<PropertyCheck> checks;

  bool all_pass() const {
    for (const auto& c : checks)
      if (!c.pass) return false;
    return true;
  }

  std::string to_text() const {
    std::ostringstream out;
    for (const auto& c : checks) {
      out << (c.pass ? "PASS" : "FAIL") << "  " << c.name << "  (" << c.cases << " cases, "
          << c.violations << " violations";
      if (!c.pass) out << ", worst " << c.worst << ", witness " << c.witness;
      out << ")\n";
    }
    return out.str();
  }
};

namespace detail {

inline std::string tuple_witness(long s, const Slate& prefix, ActionId a) {
  std::ostringstream out;
  out << "state " << s << ", prefix (";
  for (std::size_t i = 0; i < prefix.size(); ++i) out << (i ? "," : "") << prefix[i];
  out << "), action " << a;
  return out.str();
}

inline void record_violation(PropertyCheck& check, Real magnitude, const std::string& witness) {
  ++check.violations;
  check.pass = false;
  if (magnitude > check.worst) check.worst = magnitude;
  if (check.witness.empty()) check.witness = witness;
}

}  // namespace detail

/// Verifies both sequential-presentation conditions by enumeration: the
/// executed action's probability depends only on the slate up to that
/// action, and moving an action later never raises its probability.
template <class Model>
PropertyReport check_sequential_presentation(const Model& m, Real tolerance = 1e-9) {
  PropertyCheck truncation{"sequential presentation: probability depends only on the prefix"};
  PropertyCheck damage{"sequential presentation: later position never raises probability"};

  const long l = m.slate_size();
  for (long s = 0; s < m.state_count(); ++s) {
    const auto& acts = m.actions(s);
    for_each_distinct_prefix(acts, l - 1, [&](const Slate& prefix) {
      for (ActionId a : acts) {
        Slate with_a = prefix;
        with_a.push_back(a);
        const Real p_ref = probability_of(m.execution(s, with_a), a);

        // appending any suffix must not change a's probability
        const long room = l - static_cast<long>(with_a.size());
        for (long suffix_len = 1; suffix_len <= room; ++suffix_len) {
          for_each_slate(acts, suffix_len, [&](const Slate& suffix) {
            Slate full = with_a;
            full.insert(full.end(), suffix.begin(), suffix.end());
            const Real p = probability_of(m.execution(s, full), a);
            ++truncation.cases;
            if (std::abs(p - p_ref) > tolerance)
              detail::record_violation(truncation, std::abs(p - p_ref),
                                       detail::tuple_witness(s, full, a));
          });
        }

        // dropping the last prefix entry must not lower a's probability
        if (!prefix.empty()) {
          Slate shorter(prefix.begin(), prefix.end() - 1);
          shorter.push_back(a);
          const Real p_earlier = probability_of(m.execution(s, shorter), a);
          ++damage.cases;
          if (p_ref > p_earlier + tolerance)
            detail::record_violation(damage, p_ref - p_earlier,
                                     detail::tuple_witness(s, prefix, a));
        }
      }
    });
  }
  return {{truncation, damage}};
}

/// Tests monotonicity and diminishing returns of the one-step slate value
/// over every duplicate-free prefix, using the solved state values.
template <class Model>
PropertyReport check_submodular_monotone(const Model& m, const ExactSolution& sol,
                                         Real tolerance = 1e-9) {
  PropertyCheck monotone{"slate value is monotone in appended actions"};
  PropertyCheck submodular{"slate value has diminishing returns"};

  for (long s = 0; s < m.state_count(); ++s) {
    const auto& acts = m.actions(s);
    for_each_distinct_prefix(acts, m.slate_size() - 1, [&](const Slate& prefix) {
      const Real f_prefix = exact_slate_value(m, sol, s, prefix);
      Real f_shorter = 0.0;
      if (!prefix.empty()) {
        const Slate shorter(prefix.begin(), prefix.end() - 1);
        f_shorter = exact_slate_value(m, sol, s, shorter);
      }
      for (ActionId a : acts) {
        Slate with_a = prefix;
        with_a.push_back(a);
        const Real f_appended = exact_slate_value(m, sol, s, with_a);

        ++monotone.cases;
        if (f_appended < f_prefix - tolerance)
          detail::record_violation(monotone, f_prefix - f_appended,
                                   detail::tuple_witness(s, prefix, a));

        if (!prefix.empty()) {
          Slate shorter_with_a(prefix.begin(), prefix.end() - 1);
          shorter_with_a.push_back(a);
          const Real gain_late = f_appended - f_prefix;
          const Real gain_early =
              exact_slate_value(m, sol, s, shorter_with_a) - f_shorter;
          ++submodular.cases;
          if (gain_late > gain_early + tolerance)
            detail::record_violation(submodular, gain_late - gain_early,
                                     detail::tuple_witness(s, prefix, a));
        }
      }
    });
  }
  return {{monotone, submodular}};
}

/// Samples transitions with slates mixing candidates and arbitrary
/// actions; every fail outcome must end the episode with zero reward.
template <class Env>
PropertyReport check_fatal_failure(const Env& env, long samples, RandomSource& rng) {
  PropertyCheck check{"fail outcomes end the episode with zero reward"};
  const EnvironmentSpec& spec = spec_of(env);
  for (long i = 0; i < samples; ++i) {
    const StateId s = state(rng.uniform_int(spec.n_states));
    Slate slate(spec.slate_size);
    const auto cands = candidate_actions(spec, s);
    for (long j = 0; j < spec.slate_size; ++j) {
      // arbitrary ids mixed in so zero-weight entries get exercised
      slate[j] = rng.uniform() < 0.5 ? cands[rng.uniform_int(static_cast<long>(cands.size()))]
                                     : rng.uniform_int(spec.n_states);
    }
    const TransitionRecord rec = step(env, s, slate, rng);
    if (!rec.executed) {
      ++check.cases;
      if (!(rec.terminal && rec.reward == 0.0 && rec.next_state == StateId::end()))
        detail::record_violation(check, std::abs(rec.reward) + (rec.terminal ? 0.0 : 1.0),
                                 detail::tuple_witness(s.index, slate, -1));
    }
  }
  return {{check}};
}

/// Under fatal failure the slate value summed over all actions equals the
/// sum restricted to slate members, since everything else carries zero
/// probability. Checked numerically over the full enumeration.
template <class Model>
PropertyReport check_restricted_sum(const Model& m, const ExactSolution& sol,
                                    Real tolerance = 1e-10) {
  PropertyCheck check{"value sum over all actions equals sum over slate members"};
  for (long s = 0; s < m.state_count(); ++s) {
    for_each_slate(m.actions(s), m.slate_size(), [&](const Slate& slate) {
      const ExecutionDistribution dist = m.execution(s, slate);
      // an action appearing twice in the slate is only counted once
      Slate seen;
      Real over_slate = 0.0;
      for (ActionId a : slate) {
        if (std::find(seen.begin(), seen.end(), a) != seen.end()) continue;
        seen.push_back(a);
        over_slate += probability_of(dist, a) *
                      (m.reward(a) + sol.gamma * (1.0 - m.p_end_exec()) * sol.v[a]);
      }
      Real over_all = 0.0;
      for (long a = 0; a < m.state_count(); ++a)
        over_all += probability_of(dist, a) *
                    (m.reward(a) + sol.gamma * (1.0 - m.p_end_exec()) * sol.v[a]);
      ++check.cases;
      if (std::abs(over_all - over_slate) > tolerance)
        detail::record_violation(check, std::abs(over_all - over_slate),
                                 detail::tuple_witness(s, slate, -1));
    });
  }
  return {{check}};
}

}  // namespace slatesim
