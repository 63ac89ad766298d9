// Feed-forward network engine: forward pass, exact backpropagation for
// parameters and inputs, SGD updates and soft target tracking. Batched
// variants take one sample per column.
#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <json.hpp>

#include "slatesim/rng.hpp"
#include "slatesim/types.hpp"

namespace slatesim {

enum class Activation { kRelu, kTanh };

inline std::string to_string(Activation a) {
  return a == Activation::kRelu ? "relu" : "tanh";
}

inline Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::kRelu;
  if (s == "tanh") return Activation::kTanh;
  throw ConfigError("unknown activation '" + s + "'");
}

/// Hidden layers use the configured nonlinearity, the output layer is
/// linear. weights[k] maps layer k to layer k+1.
struct MlpNetwork {
  std::vector<long> layer_sizes;
  std::vector<Mat> weights;
  std::vector<Vec> biases;
  Activation activation = Activation::kRelu;

  long input_size() const { return layer_sizes.front(); }
  long output_size() const { return layer_sizes.back(); }
};

/// Same shapes as the network parameters.
struct MlpGradient {
  std::vector<Mat> weights;
  std::vector<Vec> biases;
};

namespace detail {

inline void apply_activation(Activation a, Mat& z) {
  if (a == Activation::kRelu)
    z = z.cwiseMax(0.0);
  else
    z = z.array().tanh().matrix();
}

// Derivative expressed through the post-activation value: relu' = 1{x>0},
// tanh' = 1 - x^2.
inline Mat activation_derivative(Activation a, const Mat& post) {
  if (a == Activation::kRelu)
    return (post.array() > 0.0).cast<Real>().matrix();
  return (1.0 - post.array().square()).matrix();
}

// Post-activation values of every layer, activations[0] being the input.
inline std::vector<Mat> forward_trace(const MlpNetwork& net, const Mat& input) {
  if (input.rows() != net.input_size())
    throw std::invalid_argument("forward: input has " + std::to_string(input.rows()) +
                                " rows, network expects " +
                                std::to_string(net.input_size()));
  std::vector<Mat> activations;
  activations.reserve(net.weights.size() + 1);
  activations.push_back(input);
  for (std::size_t k = 0; k < net.weights.size(); ++k) {
    Mat z = net.weights[k] * activations.back();
    z.colwise() += net.biases[k];
    if (k + 1 < net.weights.size()) apply_activation(net.activation, z);
    activations.push_back(std::move(z));
  }
  return activations;
}

}  // namespace detail

/// Uniform init in [-1/sqrt(fan_in), 1/sqrt(fan_in)] per layer.
inline MlpNetwork make_mlp(std::vector<long> layer_sizes, Activation activation,
                           RandomSource& rng) {
  if (layer_sizes.size() < 2) throw ConfigError("network needs at least input and output sizes");
  for (long n : layer_sizes)
    if (n <= 0) throw ConfigError("layer sizes must be positive");

  MlpNetwork net;
  net.layer_sizes = std::move(layer_sizes);
  net.activation = activation;
  for (std::size_t k = 0; k + 1 < net.layer_sizes.size(); ++k) {
    const long fan_in = net.layer_sizes[k];
    const long fan_out = net.layer_sizes[k + 1];
    const Real bound = 1.0 / std::sqrt(static_cast<Real>(fan_in));
    Mat w(fan_out, fan_in);
    for (long i = 0; i < fan_out; ++i)
      for (long j = 0; j < fan_in; ++j) w(i, j) = rng.uniform(-bound, bound);
    Vec b(fan_out);
    for (long i = 0; i < fan_out; ++i) b[i] = rng.uniform(-bound, bound);
    net.weights.push_back(std::move(w));
    net.biases.push_back(std::move(b));
  }
  return net;
}

inline Mat forward(const MlpNetwork& net, const Mat& input) {
  return detail::forward_trace(net, input).back();
}

inline Vec forward(const MlpNetwork& net, const Vec& input) {
  return forward(net, Mat(input)).col(0);
}

inline MlpGradient zero_gradient(const MlpNetwork& net) {
  MlpGradient g;
  for (std::size_t k = 0; k < net.weights.size(); ++k) {
    g.weights.push_back(Mat::Zero(net.weights[k].rows(), net.weights[k].cols()));
    g.biases.push_back(Vec::Zero(net.biases[k].size()));
  }
  return g;
}

/// Exact gradient of a scalar loss with respect to every parameter, given
/// dL/d(output) per sample column. Batch columns are summed.
inline MlpGradient grad_params(const MlpNetwork& net, const Mat& input,
                               const Mat& loss_grad_at_output) {
  if (loss_grad_at_output.rows() != net.output_size() ||
      loss_grad_at_output.cols() != input.cols())
    throw std::invalid_argument("grad_params: loss gradient shape mismatch");

  const std::vector<Mat> acts = detail::forward_trace(net, input);
  MlpGradient g;
  g.weights.resize(net.weights.size());
  g.biases.resize(net.weights.size());

  Mat delta = loss_grad_at_output;
  for (std::size_t k = net.weights.size(); k-- > 0;) {
    g.weights[k] = delta * acts[k].transpose();
    g.biases[k] = delta.rowwise().sum();
    if (k > 0)
      delta = (net.weights[k].transpose() * delta)
                  .cwiseProduct(detail::activation_derivative(net.activation, acts[k]));
  }
  return g;
}

inline MlpGradient grad_params(const MlpNetwork& net, const Vec& input,
                               const Vec& loss_grad_at_output) {
  return grad_params(net, Mat(input), Mat(loss_grad_at_output));
}

/// Gradient of the scalar output with respect to the input, one column
/// per sample. Requires a scalar output layer.
inline Mat grad_input(const MlpNetwork& net, const Mat& input) {
  if (net.output_size() != 1)
    throw std::logic_error("grad_input requires a scalar output layer");

  const std::vector<Mat> acts = detail::forward_trace(net, input);
  Mat delta = Mat::Ones(1, input.cols());
  for (std::size_t k = net.weights.size(); k-- > 0;) {
    delta = net.weights[k].transpose() * delta;
    if (k > 0)
      delta = delta.cwiseProduct(detail::activation_derivative(net.activation, acts[k]));
  }
  return delta;
}

inline Vec grad_input(const MlpNetwork& net, const Vec& input) {
  return grad_input(net, Mat(input)).col(0);
}

/// theta <- theta - eta * gradient. Faults loudly if any parameter stops
/// being finite.
inline void sgd_step(MlpNetwork& net, const MlpGradient& gradient, Real eta) {
  if (gradient.weights.size() != net.weights.size())
    throw std::invalid_argument("sgd_step: gradient layer count mismatch");
  for (std::size_t k = 0; k < net.weights.size(); ++k) {
    if (gradient.weights[k].rows() != net.weights[k].rows() ||
        gradient.weights[k].cols() != net.weights[k].cols() ||
        gradient.biases[k].size() != net.biases[k].size())
      throw std::invalid_argument("sgd_step: gradient shape mismatch");
    net.weights[k] -= eta * gradient.weights[k];
    net.biases[k] -= eta * gradient.biases[k];
    if (!net.weights[k].allFinite() || !net.biases[k].allFinite())
      throw NumericalFault("non-finite network parameter after update");
  }
}

/// A learned network plus its slowly tracking copy.
struct TargetPair {
  MlpNetwork live;
  MlpNetwork target;
  Real tau = 1e-4;
};

inline TargetPair make_target_pair(MlpNetwork net, Real tau) {
  TargetPair pair{std::move(net), {}, tau};
  pair.target = pair.live;
  return pair;
}

/// target <- (1 - tau) * target + tau * live, every parameter.
inline void soft_update(TargetPair& pair) {
  for (std::size_t k = 0; k < pair.live.weights.size(); ++k) {
    pair.target.weights[k] =
        (1.0 - pair.tau) * pair.target.weights[k] + pair.tau * pair.live.weights[k];
    pair.target.biases[k] =
        (1.0 - pair.tau) * pair.target.biases[k] + pair.tau * pair.live.biases[k];
  }
}

inline nlohmann::json to_json(const MlpNetwork& net) {
  nlohmann::json j;
  j["version"] = 1;
  j["layer_sizes"] = net.layer_sizes;
  j["activation"] = to_string(net.activation);
  j["weights"] = nlohmann::json::array();
  j["biases"] = nlohmann::json::array();
  for (std::size_t k = 0; k < net.weights.size(); ++k) {
    nlohmann::json w = nlohmann::json::array();
    for (long i = 0; i < net.weights[k].rows(); ++i)
      for (long jj = 0; jj < net.weights[k].cols(); ++jj) w.push_back(net.weights[k](i, jj));
    j["weights"].push_back(std::move(w));
    nlohmann::json b = nlohmann::json::array();
    for (long i = 0; i < net.biases[k].size(); ++i) b.push_back(net.biases[k][i]);
    j["biases"].push_back(std::move(b));
  }
  return j;
}

inline MlpNetwork mlp_from_json(const nlohmann::json& j) {
  if (!j.contains("version") || j.at("version").get<int>() != 1)
    throw ConfigError("network checkpoint: unsupported version");
  MlpNetwork net;
  net.layer_sizes = j.at("layer_sizes").get<std::vector<long>>();
  net.activation = activation_from_string(j.at("activation").get<std::string>());
  if (net.layer_sizes.size() < 2) throw ConfigError("network checkpoint: bad layer sizes");
  for (std::size_t k = 0; k + 1 < net.layer_sizes.size(); ++k) {
    const long rows = net.layer_sizes[k + 1];
    const long cols = net.layer_sizes[k];
    const auto& w = j.at("weights").at(k);
    const auto& b = j.at("biases").at(k);
    if (static_cast<long>(w.size()) != rows * cols || static_cast<long>(b.size()) != rows)
      throw ConfigError("network checkpoint: parameter count mismatch");
    Mat weight(rows, cols);
    for (long i = 0; i < rows; ++i)
      for (long jj = 0; jj < cols; ++jj) weight(i, jj) = w.at(i * cols + jj).get<Real>();
    Vec bias(rows);
    for (long i = 0; i < rows; ++i) bias[i] = b.at(i).get<Real>();
    net.weights.push_back(std::move(weight));
    net.biases.push_back(std::move(bias));
  }
  return net;
}

}  // namespace slatesim
