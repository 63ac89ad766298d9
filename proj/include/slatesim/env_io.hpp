// Environment file format: one self-describing JSON document, lossless for
// every spec field.
#pragma once

#include <fstream>
#include <string>

#include <json.hpp>

#include "slatesim/environment.hpp"

namespace slatesim {

inline nlohmann::json to_json(const EnvironmentSpec& env) {
  nlohmann::json j;
  j["version"] = 1;
  j["n_states"] = env.n_states;
  j["feature_dim"] = env.feature_dim;
  j["slate_size"] = env.slate_size;
  j["fail_weight"] = env.fail_weight;
  j["p_end_fail"] = env.p_end_fail;
  j["p_end_exec"] = env.p_end_exec;
  j["position_discount"] =
      env.position_discount == PositionDiscount::kDivide ? "divide" : "multiply";
  if (env.initial_state)
    j["initial_state"] = *env.initial_state;
  else
    j["initial_state"] = nullptr;

  j["rewards"] = nlohmann::json::array();
  for (long s = 0; s < env.n_states; ++s) j["rewards"].push_back(env.rewards[s]);

  j["features"] = nlohmann::json::array();
  for (long s = 0; s < env.n_states; ++s) {
    nlohmann::json col = nlohmann::json::array();
    for (long i = 0; i < env.feature_dim; ++i) col.push_back(env.features(i, s));
    j["features"].push_back(std::move(col));
  }

  j["edges"] = nlohmann::json::array();
  for (long s = 0; s < env.n_states; ++s) {
    nlohmann::json out = nlohmann::json::array();
    for (const Edge& e : env.edges[s]) out.push_back({e.action, e.weight});
    j["edges"].push_back(std::move(out));
  }
  return j;
}

inline EnvironmentSpec environment_from_json(const nlohmann::json& j) {
  if (!j.contains("version") || j.at("version").get<int>() != 1)
    throw ConfigError("environment file: unsupported version");

  EnvironmentSpec env;
  env.n_states = j.at("n_states").get<long>();
  env.feature_dim = j.at("feature_dim").get<long>();
  env.slate_size = j.at("slate_size").get<long>();
  env.fail_weight = j.at("fail_weight").get<Real>();
  env.p_end_fail = j.at("p_end_fail").get<Real>();
  env.p_end_exec = j.at("p_end_exec").get<Real>();
  if (j.contains("position_discount")) {
    const std::string mode = j.at("position_discount").get<std::string>();
    if (mode == "divide")
      env.position_discount = PositionDiscount::kDivide;
    else if (mode == "multiply")
      env.position_discount = PositionDiscount::kMultiply;
    else
      throw ConfigError("environment file: unknown position_discount '" + mode + "'");
  }
  if (j.contains("initial_state") && !j.at("initial_state").is_null())
    env.initial_state = j.at("initial_state").get<long>();

  if (env.n_states <= 0 || env.feature_dim <= 0)
    throw ConfigError("environment file: bad dimensions");

  const auto& rewards = j.at("rewards");
  env.rewards.resize(env.n_states);
  for (long s = 0; s < env.n_states; ++s) env.rewards[s] = rewards.at(s).get<Real>();

  const auto& features = j.at("features");
  env.features.resize(env.feature_dim, env.n_states);
  for (long s = 0; s < env.n_states; ++s)
    for (long i = 0; i < env.feature_dim; ++i)
      env.features(i, s) = features.at(s).at(i).get<Real>();

  const auto& edges = j.at("edges");
  env.edges.resize(env.n_states);
  for (long s = 0; s < env.n_states; ++s) {
    for (const auto& pair : edges.at(s))
      env.edges[s].push_back({pair.at(0).get<ActionId>(), pair.at(1).get<Real>()});
  }

  validate(env);
  return env;
}

inline std::string environment_to_string(const EnvironmentSpec& env) {
  return to_json(env).dump(2) + "\n";
}

inline void save_environment(const EnvironmentSpec& env, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open for writing: " + path);
  out << environment_to_string(env);
}

inline EnvironmentSpec load_environment(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open environment file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed environment file " + path + ": " + e.what());
  }
  return environment_from_json(j);
}

}  // namespace slatesim
