// The three slate agent families: simple top-K over per-action values,
// sequentially greedy maximization of a full-slate value function, and a
// deterministic policy that guides a kNN-restricted greedy search.
#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "slatesim/environment.hpp"
#include "slatesim/knn.hpp"
#include "slatesim/mlp.hpp"
#include "slatesim/replay.hpp"
#include "slatesim/rng.hpp"

namespace slatesim {

enum class AgentKind { kTopK, kFullSlate, kDpgKnn };

inline std::string to_string(AgentKind k) {
  switch (k) {
    case AgentKind::kTopK: return "topk";
    case AgentKind::kFullSlate: return "full";
    case AgentKind::kDpgKnn: return "dpgknn";
  }
  return "full";
}

inline AgentKind agent_kind_from_string(const std::string& s) {
  if (s == "topk") return AgentKind::kTopK;
  if (s == "full") return AgentKind::kFullSlate;
  if (s == "dpgknn") return AgentKind::kDpgKnn;
  throw ConfigError("unknown agent kind '" + s + "' (expected topk|full|dpgknn)");
}

struct AgentConfig {
  AgentKind kind = AgentKind::kFullSlate;
  long slate_size = 1;
  Real epsilon = 0.1;
  Real gamma = 0.99;
  Real eta = 1e-3;
  Real tau = 1e-4;
  long batch_size = 32;
  long buffer_capacity = 100000;
  /// Neighbors per slot for kDpgKnn: 0 keeps every candidate, a value in
  /// (0,1) keeps that fraction (rounded up), >= 1 is an absolute count.
  Real knn = 0.1;
  /// Training reward exponent; evaluation always uses raw rewards.
  Real alpha = 1.0;
  Activation activation = Activation::kRelu;
  /// The policy net defaults to tanh: ascent updates kill relu units.
  Activation policy_activation = Activation::kTanh;
  std::vector<long> q_hidden = {100, 100};
  std::vector<long> policy_hidden = {25, 25};
};

inline void validate(const AgentConfig& cfg) {
  if (cfg.slate_size < 1) throw ConfigError("agent: slate_size must be at least 1");
  if (cfg.epsilon < 0.0 || cfg.epsilon > 1.0) throw ConfigError("agent: epsilon outside [0,1]");
  if (cfg.gamma < 0.0 || cfg.gamma > 1.0) throw ConfigError("agent: gamma outside [0,1]");
  if (!(cfg.eta > 0.0)) throw ConfigError("agent: eta must be positive");
  if (!(cfg.tau > 0.0) || cfg.tau > 1.0) throw ConfigError("agent: tau outside (0,1]");
  if (cfg.batch_size < 1) throw ConfigError("agent: batch_size must be at least 1");
  if (cfg.buffer_capacity < 1) throw ConfigError("agent: buffer_capacity must be at least 1");
  if (cfg.knn < 0.0) throw ConfigError("agent: knn must be non-negative");
  if (!(cfg.alpha > 0.0)) throw ConfigError("agent: alpha must be positive");
}

/// Per-slot neighbor count for a candidate set of size n.
inline long resolve_knn(Real knn, long n) {
  if (knn == 0.0) return n;
  long k = knn < 1.0 ? static_cast<long>(std::ceil(knn * static_cast<Real>(n)))
                     : static_cast<long>(knn);
  return std::clamp(k, 1L, n);
}

/// Scalar slate value: the network applied to the feature encoding.
inline Real q_value(const MlpNetwork& qnet, const EnvironmentSpec& env, StateId s,
                    const Slate& slate) {
  return forward(qnet, slate_features(env, s, slate))[0];
}

/// Fills slots left to right; slot i maximizes eval_slot over its choice
/// set with slots 1..i-1 fixed. eval_slot(prefix, choices) returns one
/// value per choice; ties break toward the smallest action id. Evaluation
/// count is exactly the sum of the choice-set sizes.
template <class F>
Slate sequential_greedy(F&& eval_slot, long slate_len,
                        const std::vector<std::vector<ActionId>>& slot_choices) {
  if (static_cast<long>(slot_choices.size()) != slate_len)
    throw std::invalid_argument("sequential_greedy: need one choice set per slot");
  Slate chosen;
  chosen.reserve(slate_len);
  for (long slot = 0; slot < slate_len; ++slot) {
    const auto& choices = slot_choices[slot];
    if (choices.empty()) throw std::domain_error("sequential_greedy: empty choice set");
    const Vec values = eval_slot(chosen, choices);
    long best = 0;
    for (long i = 1; i < static_cast<long>(choices.size()); ++i) {
      if (values[i] > values[best] ||
          (values[i] == values[best] && choices[i] < choices[best]))
        best = i;
    }
    chosen.push_back(choices[best]);
  }
  return chosen;
}

namespace detail {

// Batched slot evaluation: columns are [state | fixed prefix | a | a | ...]
// with the candidate under evaluation repeated through the open slots.
inline Vec padded_slot_values(const MlpNetwork& qnet, const EnvironmentSpec& env, StateId s,
                              long slate_len, const Slate& prefix,
                              const std::vector<ActionId>& choices) {
  const long d = env.feature_dim;
  const long fixed = static_cast<long>(prefix.size());
  Mat inputs(d * (slate_len + 1), static_cast<long>(choices.size()));

  Vec head(d * (fixed + 1));
  head.head(d) = env.features.col(s.index);
  for (long i = 0; i < fixed; ++i) head.segment(d * (i + 1), d) = env.features.col(prefix[i]);

  for (long c = 0; c < static_cast<long>(choices.size()); ++c) {
    check_action(env, choices[c]);
    inputs.col(c).head(head.size()) = head;
    for (long slot = fixed; slot < slate_len; ++slot)
      inputs.col(c).segment(d * (slot + 1), d) = env.features.col(choices[c]);
  }
  return forward(qnet, inputs).row(0).transpose();
}

}  // namespace detail

/// Sequentially greedy slate under a full-slate value network. The slate
/// length comes from the network's input width. When restrict is given it
/// supplies the per-slot choice sets, otherwise every slot ranges over
/// candidates.
inline Slate greedy_slate(const MlpNetwork& qnet, const EnvironmentSpec& env, StateId s,
                          const std::vector<ActionId>& candidates,
                          const std::vector<std::vector<ActionId>>* restrict = nullptr) {
  const long d = env.feature_dim;
  if (qnet.input_size() % d != 0 || qnet.input_size() / d < 2)
    throw std::invalid_argument("greedy_slate: network width is not state plus slots");
  const long slate_len = qnet.input_size() / d - 1;
  if (candidates.empty() && !restrict)
    throw std::domain_error("greedy_slate: no candidate actions");

  std::vector<std::vector<ActionId>> slots;
  if (restrict) {
    slots = *restrict;
  } else {
    slots.assign(slate_len, candidates);
  }
  return sequential_greedy(
      [&](const Slate& prefix, const std::vector<ActionId>& choices) {
        return detail::padded_slot_values(qnet, env, s, slate_len, prefix, choices);
      },
      slate_len, slots);
}

/// The l highest-valued candidates by the single-action network, in
/// descending value order, ties toward smaller ids. With fewer candidates
/// than slots the sorted list cycles.
inline Slate top_k_slate(const MlpNetwork& qnet, const EnvironmentSpec& env, StateId s,
                         const std::vector<ActionId>& candidates, long slate_len) {
  if (candidates.empty()) throw std::domain_error("top_k_slate: no candidate actions");
  if (slate_len < 1) throw std::invalid_argument("top_k_slate: slate length must be >= 1");
  const long d = env.feature_dim;
  if (qnet.input_size() != 2 * d)
    throw std::invalid_argument("top_k_slate: expected a state-action network");

  const long c = static_cast<long>(candidates.size());
  Mat inputs(2 * d, c);
  for (long i = 0; i < c; ++i) {
    check_action(env, candidates[i]);
    inputs.col(i).head(d) = env.features.col(s.index);
    inputs.col(i).tail(d) = env.features.col(candidates[i]);
  }
  const Vec values = forward(qnet, inputs).row(0).transpose();

  std::vector<long> order(c);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](long a, long b) {
    if (values[a] != values[b]) return values[a] > values[b];
    return candidates[a] < candidates[b];
  });

  Slate out(slate_len);
  for (long i = 0; i < slate_len; ++i) out[i] = candidates[order[i % c]];
  return out;
}

/// Uniformly random exploration slate: without replacement while the
/// candidate set lasts, cycling a full shuffle beyond that.
inline Slate random_slate(const std::vector<ActionId>& candidates, long slate_len,
                          RandomSource& rng) {
  if (candidates.empty()) throw std::domain_error("random_slate: no candidate actions");
  std::vector<ActionId> pool = candidates;
  const long c = static_cast<long>(pool.size());
  for (long i = 0; i < std::min(slate_len, c); ++i) {
    const long j = i + rng.uniform_int(c - i);
    std::swap(pool[i], pool[j]);
  }
  Slate out(slate_len);
  for (long i = 0; i < slate_len; ++i) out[i] = pool[i % c];
  return out;
}

/// One agent: value network pair, optional policy pair, replay buffer and
/// per-state candidate caches. Single-writer; evaluation may run on
/// copies.
struct SlateAgent {
  AgentConfig config;
  const EnvironmentSpec* env = nullptr;
  TargetPair q;
  std::optional<TargetPair> policy;
  ReplayBuffer replay;
  std::vector<std::vector<ActionId>> candidates;
  std::vector<KnnIndex> knn;  // only populated for kDpgKnn

  /// Slate length used while training: Algorithm-1-style top-K agents
  /// train on single actions and only present full slates at evaluation.
  long train_slate_size() const {
    return config.kind == AgentKind::kTopK ? 1 : config.slate_size;
  }
};

inline SlateAgent make_agent(const AgentConfig& config, const EnvironmentSpec& env,
                             RandomSource& rng) {
  validate(config);
  const long d = env.feature_dim;
  const long q_input =
      config.kind == AgentKind::kTopK ? 2 * d : d * (config.slate_size + 1);

  std::vector<long> q_sizes{q_input};
  q_sizes.insert(q_sizes.end(), config.q_hidden.begin(), config.q_hidden.end());
  q_sizes.push_back(1);

  SlateAgent agent{config, &env, make_target_pair(make_mlp(q_sizes, config.activation, rng),
                                                  config.tau),
                   std::nullopt, ReplayBuffer(static_cast<std::size_t>(config.buffer_capacity)),
                   {}, {}};

  if (config.kind == AgentKind::kDpgKnn) {
    std::vector<long> p_sizes{d};
    p_sizes.insert(p_sizes.end(), config.policy_hidden.begin(), config.policy_hidden.end());
    p_sizes.push_back(d * config.slate_size);
    agent.policy =
        make_target_pair(make_mlp(p_sizes, config.policy_activation, rng), config.tau);
  }

  agent.candidates.resize(env.n_states);
  for (long s = 0; s < env.n_states; ++s)
    agent.candidates[s] = candidate_actions(env, state(s));
  if (config.kind == AgentKind::kDpgKnn) {
    agent.knn.resize(env.n_states);
    for (long s = 0; s < env.n_states; ++s)
      agent.knn[s] = make_knn_index(env, agent.candidates[s]);
  }
  return agent;
}

namespace detail {

// Greedy slate by the agent's own selection rule, on the live or target
// networks.
inline Slate greedy_action(const SlateAgent& agent, StateId s, long slate_len,
                           bool use_target) {
  const MlpNetwork& qnet = use_target ? agent.q.target : agent.q.live;
  const auto& cands = agent.candidates[s.index];
  switch (agent.config.kind) {
    case AgentKind::kTopK:
      return top_k_slate(qnet, *agent.env, s, cands, slate_len);
    case AgentKind::kFullSlate:
      return greedy_slate(qnet, *agent.env, s, cands);
    case AgentKind::kDpgKnn: {
      const MlpNetwork& pol = use_target ? agent.policy->target : agent.policy->live;
      const long d = agent.env->feature_dim;
      const Vec protos = forward(pol, Vec(agent.env->features.col(s.index)));
      const long k = resolve_knn(agent.config.knn, static_cast<long>(cands.size()));
      std::vector<std::vector<ActionId>> slots(agent.config.slate_size);
      for (long i = 0; i < agent.config.slate_size; ++i)
        slots[i] = knn_query(agent.knn[s.index], protos.segment(i * d, d), k);
      return greedy_slate(qnet, *agent.env, s, cands, &slots);
    }
  }
  throw std::logic_error("unreachable agent kind");
}

}  // namespace detail

enum class Phase { kTrain, kEval };

/// Epsilon-greedy slate in training, pure greedy in evaluation.
inline Slate act(const SlateAgent& agent, StateId s, RandomSource& rng,
                 Phase phase = Phase::kTrain) {
  if (s.terminal) throw std::domain_error("act at the end state");
  check_state(*agent.env, s);
  const long slate_len =
      phase == Phase::kTrain ? agent.train_slate_size() : agent.config.slate_size;
  if (phase == Phase::kTrain && rng.uniform() < agent.config.epsilon)
    return random_slate(agent.candidates[s.index], slate_len, rng);
  return detail::greedy_action(agent, s, slate_len, /*use_target=*/false);
}

struct LearnDiagnostics {
  bool updated = false;
  Real loss = 0.0;
  Real mean_target = 0.0;
};

/// One experience-replay update: push the record, regress the live value
/// network toward r + gamma * Q'(s', a') with a' re-derived by the
/// agent's own rule under the target networks, take a policy ascent step
/// for kDpgKnn, then soft-update every target. A cold buffer is a no-op.
inline LearnDiagnostics learn_step(SlateAgent& agent, const TransitionRecord& record,
                                   RandomSource& rng) {
  agent.replay.push(record);
  if (agent.replay.size() < static_cast<std::size_t>(agent.config.batch_size)) return {};

  const EnvironmentSpec& env = *agent.env;
  const long batch = agent.config.batch_size;
  const auto samples = agent.replay.sample(static_cast<std::size_t>(batch), rng);

  Vec targets(batch);
  for (long b = 0; b < batch; ++b) {
    const TransitionRecord& rec = samples[b];
    if (rec.terminal) {
      targets[b] = rec.reward;
    } else {
      const Slate next_slate =
          detail::greedy_action(agent, rec.next_state, agent.train_slate_size(),
                                /*use_target=*/true);
      targets[b] =
          rec.reward + agent.config.gamma * q_value(agent.q.target, env, rec.next_state,
                                                    next_slate);
    }
  }

  Mat inputs(agent.q.live.input_size(), batch);
  for (long b = 0; b < batch; ++b)
    inputs.col(b) = slate_features(env, samples[b].state, samples[b].slate);

  const Mat predicted = forward(agent.q.live, inputs);
  Mat loss_grad(1, batch);
  Real loss = 0.0;
  for (long b = 0; b < batch; ++b) {
    const Real err = predicted(0, b) - targets[b];
    loss += err * err;
    loss_grad(0, b) = 2.0 * err / static_cast<Real>(batch);
  }
  loss /= static_cast<Real>(batch);
  sgd_step(agent.q.live, grad_params(agent.q.live, inputs, loss_grad), agent.config.eta);

  if (agent.config.kind == AgentKind::kDpgKnn) {
    const long d = env.feature_dim;
    const long proto_len = d * agent.config.slate_size;
    Mat states(d, batch);
    for (long b = 0; b < batch; ++b)
      states.col(b) = env.features.col(samples[b].state.index);
    const Mat protos = forward(agent.policy->live, states);
    Mat q_inputs(d + proto_len, batch);
    q_inputs.topRows(d) = states;
    q_inputs.bottomRows(proto_len) = protos;
    // ascend Q at the policy output, so feed the negated value gradient
    const Mat ascent =
        -grad_input(agent.q.live, q_inputs).bottomRows(proto_len) / static_cast<Real>(batch);
    sgd_step(agent.policy->live, grad_params(agent.policy->live, states, ascent),
             agent.config.eta);
  }

  soft_update(agent.q);
  if (agent.policy) soft_update(*agent.policy);

  return {true, loss, targets.mean()};
}

inline nlohmann::json to_json(const AgentConfig& cfg) {
  return {{"kind", to_string(cfg.kind)},
          {"slate_size", cfg.slate_size},
          {"epsilon", cfg.epsilon},
          {"gamma", cfg.gamma},
          {"eta", cfg.eta},
          {"tau", cfg.tau},
          {"batch_size", cfg.batch_size},
          {"buffer_capacity", cfg.buffer_capacity},
          {"knn", cfg.knn},
          {"alpha", cfg.alpha},
          {"activation", to_string(cfg.activation)},
          {"policy_activation", to_string(cfg.policy_activation)},
          {"q_hidden", cfg.q_hidden},
          {"policy_hidden", cfg.policy_hidden}};
}

inline AgentConfig agent_config_from_json(const nlohmann::json& j) {
  AgentConfig cfg;
  cfg.kind = agent_kind_from_string(j.at("kind").get<std::string>());
  cfg.slate_size = j.at("slate_size").get<long>();
  cfg.epsilon = j.at("epsilon").get<Real>();
  cfg.gamma = j.at("gamma").get<Real>();
  cfg.eta = j.at("eta").get<Real>();
  cfg.tau = j.at("tau").get<Real>();
  cfg.batch_size = j.at("batch_size").get<long>();
  cfg.buffer_capacity = j.at("buffer_capacity").get<long>();
  cfg.knn = j.at("knn").get<Real>();
  cfg.alpha = j.at("alpha").get<Real>();
  cfg.activation = activation_from_string(j.at("activation").get<std::string>());
  cfg.policy_activation = activation_from_string(j.at("policy_activation").get<std::string>());
  cfg.q_hidden = j.at("q_hidden").get<std::vector<long>>();
  cfg.policy_hidden = j.at("policy_hidden").get<std::vector<long>>();
  validate(cfg);
  return cfg;
}

inline nlohmann::json to_json(const SlateAgent& agent) {
  nlohmann::json j;
  j["version"] = 1;
  j["config"] = to_json(agent.config);
  j["q_live"] = to_json(agent.q.live);
  j["q_target"] = to_json(agent.q.target);
  if (agent.policy) {
    j["policy_live"] = to_json(agent.policy->live);
    j["policy_target"] = to_json(agent.policy->target);
  }
  return j;
}

inline SlateAgent agent_from_json(const nlohmann::json& j, const EnvironmentSpec& env) {
  if (!j.contains("version") || j.at("version").get<int>() != 1)
    throw ConfigError("agent checkpoint: unsupported version");
  const AgentConfig cfg = agent_config_from_json(j.at("config"));
  RandomSource scratch(0);
  SlateAgent agent = make_agent(cfg, env, scratch);
  agent.q.live = mlp_from_json(j.at("q_live"));
  agent.q.target = mlp_from_json(j.at("q_target"));
  if (cfg.kind == AgentKind::kDpgKnn) {
    agent.policy->live = mlp_from_json(j.at("policy_live"));
    agent.policy->target = mlp_from_json(j.at("policy_target"));
  }
  return agent;
}

}  // namespace slatesim
