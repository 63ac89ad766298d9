// Shared vocabulary types for states, actions, slates and experience.
#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace slatesim {

using Real = double;
using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Index into the environment's action set, 0 <= id < n_states.
using ActionId = long;

/// An ordered tuple of actions presented in one step. Duplicates are
/// permitted; the environment ignores all but the earliest occurrence.
using Slate = std::vector<ActionId>;

/// A state is an index plus a flag marking the absorbing end state.
struct StateId {
  long index = 0;
  bool terminal = false;

  static constexpr StateId end() { return StateId{0, true}; }
  bool operator==(const StateId&) const = default;
};

inline StateId state(long index) { return StateId{index, false}; }

/// One step of experience. `executed == nullopt` means no slate action
/// ran (the environment picked the fail outcome).
struct TransitionRecord {
  StateId state;
  Slate slate;
  std::optional<ActionId> executed;
  Real reward = 0.0;
  StateId next_state;
  bool terminal = false;
};

/// Invalid experiment or generator configuration (CLI exit code 2).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Instance too large for exhaustive solving (CLI exit code 3).
struct OracleRefusal : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A NaN/Inf showed up in learned parameters (CLI exit code 4).
struct NumericalFault : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace slatesim
