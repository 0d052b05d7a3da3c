#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rlpath/error.hpp"
#include "rlpath/rng.hpp"

namespace rlpath {

enum class Activation { relu, softmax };

inline const char* to_string(Activation a) { return a == Activation::relu ? "relu" : "softmax"; }

struct LayerSpec {
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;
  Activation activation = Activation::relu;

  bool operator==(const LayerSpec&) const = default;
};

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-7;

  bool operator==(const AdamConfig&) const = default;
};

// One parameter tensor with its Adam moments. Weights are out_dim x in_dim, row-major.
struct ParamBlock {
  std::vector<double> value;
  std::vector<double> m;
  std::vector<double> v;

  explicit ParamBlock(std::size_t size = 0) : value(size, 0.0), m(size, 0.0), v(size, 0.0) {}

  bool operator==(const ParamBlock&) const = default;
};

struct DenseLayer {
  LayerSpec spec;
  ParamBlock weights;
  ParamBlock biases;

  bool operator==(const DenseLayer&) const = default;
};

struct PolicyNet {
  std::vector<DenseLayer> layers;
  double learning_rate = 0.01;
  AdamConfig adam;
  std::uint64_t step_count = 0;
  std::uint64_t seed = 0;

  std::size_t input_dim() const { return layers.front().spec.in_dim; }
  std::size_t output_dim() const { return layers.back().spec.out_dim; }

  std::size_t parameter_count() const {
    std::size_t total = 0;
    for (const auto& l : layers) total += l.weights.value.size() + l.biases.value.size();
    return total;
  }

  bool operator==(const PolicyNet&) const = default;
};

inline constexpr std::size_t kHiddenWidth = 64;
inline constexpr double kLogClamp = 1e-12;

// Glorot-uniform weights and zero biases, drawn layer by layer in row-major
// order from `rng` (one draw per weight).
inline PolicyNet create_model(std::size_t input_dim, std::size_t output_dim, double learning_rate,
                              Rng& rng, std::uint64_t seed = 0) {
  if (input_dim < 1) throw ConfigError("input_dim must be >= 1");
  if (output_dim < 2) throw ConfigError("output_dim must be >= 2");
  if (!(learning_rate > 0) || !std::isfinite(learning_rate)) {
    throw ConfigError("learning rate must be positive and finite");
  }

  PolicyNet net;
  net.learning_rate = learning_rate;
  net.seed = seed;
  const LayerSpec specs[] = {
      {input_dim, kHiddenWidth, Activation::relu},
      {kHiddenWidth, kHiddenWidth, Activation::relu},
      {kHiddenWidth, output_dim, Activation::softmax},
  };
  for (const auto& spec : specs) {
    DenseLayer layer{spec, ParamBlock(spec.out_dim * spec.in_dim), ParamBlock(spec.out_dim)};
    const double limit = std::sqrt(6.0 / static_cast<double>(spec.in_dim + spec.out_dim));
    for (auto& w : layer.weights.value) w = rng.uniform(-limit, limit);
    net.layers.push_back(std::move(layer));
  }
  return net;
}

inline PolicyNet create_model(std::size_t input_dim, std::size_t output_dim,
                              double learning_rate = 0.01, std::uint64_t seed = 0) {
  Rng rng(seed);
  return create_model(input_dim, output_dim, learning_rate, rng, seed);
}

inline std::vector<double> softmax(std::span<const double> logits) {
  const double peak = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  double total = 0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - peak);
    total += out[i];
  }
  for (auto& p : out) p /= total;
  return out;
}

// Per-layer activations kept for backprop. activations[0] is the input.
struct ForwardCache {
  std::vector<std::vector<double>> activations;
  std::vector<std::vector<double>> pre;  // pre-activation of each layer
};

namespace detail {

inline std::vector<double> affine(const DenseLayer& layer, std::span<const double> x) {
  const auto& s = layer.spec;
  std::vector<double> z(layer.biases.value);
  for (std::size_t o = 0; o < s.out_dim; ++o) {
    const double* row = layer.weights.value.data() + o * s.in_dim;
    double acc = 0;
    for (std::size_t i = 0; i < s.in_dim; ++i) acc += row[i] * x[i];
    z[o] += acc;
  }
  return z;
}

}  // namespace detail

inline std::vector<double> forward(const PolicyNet& net, std::span<const double> state,
                                   ForwardCache* cache = nullptr) {
  if (state.size() != net.input_dim()) {
    throw ConfigError("state length " + std::to_string(state.size()) + " != input_dim " +
                      std::to_string(net.input_dim()));
  }
  for (double x : state) {
    if (!std::isfinite(x)) throw NumericError("non-finite network input");
  }
  std::vector<double> x(state.begin(), state.end());
  if (cache) {
    cache->activations.assign(1, x);
    cache->pre.clear();
  }
  for (const auto& layer : net.layers) {
    auto z = detail::affine(layer, x);
    if (cache) cache->pre.push_back(z);
    if (layer.spec.activation == Activation::relu) {
      for (auto& v : z) v = std::max(v, 0.0);
      x = std::move(z);
    } else {
      x = softmax(z);
    }
    if (cache) cache->activations.push_back(x);
  }
  return x;
}

// Categorical cross-entropy against a scaled one-hot (or any non-negative) target.
inline double loss(std::span<const double> probs, std::span<const double> target) {
  double total = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (target[i] != 0) total -= target[i] * std::log(std::max(probs[i], kLogClamp));
  }
  return total;
}

// Gradient of the loss with respect to every parameter, laid out like the net.
struct Gradients {
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> biases;
};

// Backprop for one (state, target) pair. Returns the loss; fills `grads`.
// `cached` may carry a forward pass of the same state under the current
// parameters.
inline double compute_gradients(const PolicyNet& net, std::span<const double> state,
                                std::span<const double> target, Gradients& grads,
                                const ForwardCache* cached = nullptr) {
  if (target.size() != net.output_dim()) {
    throw ConfigError("target length " + std::to_string(target.size()) + " != output_dim " +
                      std::to_string(net.output_dim()));
  }
  ForwardCache local;
  if (!cached) {
    forward(net, state, &local);
    cached = &local;
  }
  const ForwardCache& cache = *cached;
  const auto& probs = cache.activations.back();
  const double value = loss(probs, target);

  double target_mass = 0;
  for (double t : target) target_mass += t;

  // dL/dz at the softmax logits.
  std::vector<double> delta(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) delta[i] = probs[i] * target_mass - target[i];

  const std::size_t depth = net.layers.size();
  grads.weights.assign(depth, {});
  grads.biases.assign(depth, {});
  for (std::size_t k = depth; k-- > 0;) {
    const auto& layer = net.layers[k];
    const auto& s = layer.spec;
    const auto& input = cache.activations[k];
    auto& gw = grads.weights[k];
    gw.assign(s.out_dim * s.in_dim, 0.0);
    for (std::size_t o = 0; o < s.out_dim; ++o) {
      for (std::size_t i = 0; i < s.in_dim; ++i) gw[o * s.in_dim + i] = delta[o] * input[i];
    }
    grads.biases[k] = delta;
    if (k == 0) break;

    std::vector<double> upstream(s.in_dim, 0.0);
    for (std::size_t o = 0; o < s.out_dim; ++o) {
      const double* row = layer.weights.value.data() + o * s.in_dim;
      for (std::size_t i = 0; i < s.in_dim; ++i) upstream[i] += row[i] * delta[o];
    }
    // Previous layer is relu; its derivative is taken as 0 at 0.
    const auto& pre = cache.pre[k - 1];
    for (std::size_t i = 0; i < s.in_dim; ++i) {
      if (pre[i] <= 0) upstream[i] = 0;
    }
    delta = std::move(upstream);
  }
  return value;
}

// Adam step with the bias corrections 1 - beta^t already computed.
inline double adam_apply(double param, double grad, double& m, double& v, double correction1,
                         double correction2, double lr, const AdamConfig& cfg) {
  m = cfg.beta1 * m + (1 - cfg.beta1) * grad;
  v = cfg.beta2 * v + (1 - cfg.beta2) * grad * grad;
  const double m_hat = m / correction1;
  const double v_hat = v / correction2;
  return param - lr * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
}

// Single-element Adam update; `step` is the 1-based update count.
inline double adam_update(double param, double grad, double& m, double& v, std::uint64_t step,
                          double lr, const AdamConfig& cfg = {}) {
  const double t = static_cast<double>(step);
  return adam_apply(param, grad, m, v, 1 - std::pow(cfg.beta1, t), 1 - std::pow(cfg.beta2, t), lr,
                    cfg);
}

// One backprop + Adam update (batch of one). Returns the loss before the update.
inline double train_step(PolicyNet& net, std::span<const double> state,
                         std::span<const double> target, const ForwardCache* cached = nullptr) {
  for (double t : target) {
    if (!(t >= 0) || !std::isfinite(t)) throw ConfigError("target entries must be finite and >= 0");
  }
  Gradients grads;
  const double value = compute_gradients(net, state, target, grads, cached);
  if (!std::isfinite(value)) throw NumericError("non-finite loss");
  for (std::size_t k = 0; k < net.layers.size(); ++k) {
    auto finite = [](const std::vector<double>& g) {
      return std::all_of(g.begin(), g.end(), [](double x) { return std::isfinite(x); });
    };
    if (!finite(grads.weights[k]) || !finite(grads.biases[k])) {
      throw NumericError("non-finite gradient in layer " + std::to_string(k));
    }
  }

  const double t = static_cast<double>(++net.step_count);
  const double c1 = 1 - std::pow(net.adam.beta1, t);
  const double c2 = 1 - std::pow(net.adam.beta2, t);
  auto apply = [&](ParamBlock& block, const std::vector<double>& g) {
    for (std::size_t i = 0; i < g.size(); ++i) {
      block.value[i] =
          adam_apply(block.value[i], g[i], block.m[i], block.v[i], c1, c2, net.learning_rate, net.adam);
    }
  };
  for (std::size_t k = 0; k < net.layers.size(); ++k) {
    apply(net.layers[k].weights, grads.weights[k]);
    apply(net.layers[k].biases, grads.biases[k]);
  }
  return value;
}

// Checkpoint container. Doubles are written with round-trip precision, so
// save followed by load reproduces every parameter bit for bit.
inline constexpr const char* kCheckpointFormat = "rlpath-policynet";
inline constexpr int kCheckpointVersion = 1;

inline nlohmann::ordered_json checkpoint_to_json(const PolicyNet& net) {
  nlohmann::ordered_json doc;
  doc["format"] = kCheckpointFormat;
  doc["version"] = kCheckpointVersion;
  doc["seed"] = net.seed;
  doc["learning_rate"] = net.learning_rate;
  doc["adam"] = {{"beta1", net.adam.beta1}, {"beta2", net.adam.beta2}, {"epsilon", net.adam.epsilon}};
  doc["step_count"] = net.step_count;
  auto& layers = doc["layers"] = nlohmann::ordered_json::array();
  for (const auto& l : net.layers) {
    nlohmann::ordered_json rec;
    rec["in_dim"] = l.spec.in_dim;
    rec["out_dim"] = l.spec.out_dim;
    rec["activation"] = to_string(l.spec.activation);
    rec["weights"] = l.weights.value;
    rec["biases"] = l.biases.value;
    rec["adam_m_weights"] = l.weights.m;
    rec["adam_v_weights"] = l.weights.v;
    rec["adam_m_biases"] = l.biases.m;
    rec["adam_v_biases"] = l.biases.v;
    layers.push_back(std::move(rec));
  }
  return doc;
}

inline PolicyNet checkpoint_from_json(const nlohmann::json& doc) {
  if (doc.value("format", "") != kCheckpointFormat || doc.value("version", 0) != kCheckpointVersion) {
    throw ValidationError("not a version 1 policy checkpoint");
  }
  try {
    PolicyNet net;
    net.seed = doc.at("seed").get<std::uint64_t>();
    net.learning_rate = doc.at("learning_rate").get<double>();
    net.adam.beta1 = doc.at("adam").at("beta1").get<double>();
    net.adam.beta2 = doc.at("adam").at("beta2").get<double>();
    net.adam.epsilon = doc.at("adam").at("epsilon").get<double>();
    net.step_count = doc.at("step_count").get<std::uint64_t>();
    for (const auto& rec : doc.at("layers")) {
      DenseLayer layer;
      layer.spec.in_dim = rec.at("in_dim").get<std::size_t>();
      layer.spec.out_dim = rec.at("out_dim").get<std::size_t>();
      const auto act = rec.at("activation").get<std::string>();
      if (act != "relu" && act != "softmax") throw ValidationError("unknown activation " + act);
      layer.spec.activation = act == "relu" ? Activation::relu : Activation::softmax;
      layer.weights.value = rec.at("weights").get<std::vector<double>>();
      layer.weights.m = rec.at("adam_m_weights").get<std::vector<double>>();
      layer.weights.v = rec.at("adam_v_weights").get<std::vector<double>>();
      layer.biases.value = rec.at("biases").get<std::vector<double>>();
      layer.biases.m = rec.at("adam_m_biases").get<std::vector<double>>();
      layer.biases.v = rec.at("adam_v_biases").get<std::vector<double>>();
      const auto wsize = layer.spec.in_dim * layer.spec.out_dim;
      if (layer.weights.value.size() != wsize || layer.weights.m.size() != wsize ||
          layer.weights.v.size() != wsize || layer.biases.value.size() != layer.spec.out_dim ||
          layer.biases.m.size() != layer.spec.out_dim || layer.biases.v.size() != layer.spec.out_dim) {
        throw ValidationError("checkpoint layer shape mismatch");
      }
      net.layers.push_back(std::move(layer));
    }
    if (net.layers.empty()) throw ValidationError("checkpoint has no layers");
    for (std::size_t k = 0; k + 1 < net.layers.size(); ++k) {
      if (net.layers[k].spec.out_dim != net.layers[k + 1].spec.in_dim ||
          net.layers[k].spec.activation != Activation::relu) {
        throw ValidationError("checkpoint layers do not chain");
      }
    }
    if (net.layers.back().spec.activation != Activation::softmax) {
      throw ValidationError("checkpoint output layer is not softmax");
    }
    return net;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed checkpoint: ") + e.what());
  }
}

inline void save_checkpoint(const PolicyNet& net, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << checkpoint_to_json(net).dump(1) << '\n';
  if (!out) throw Error(ExitCode::data, "cannot write checkpoint " + path.string());
}

inline PolicyNet load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot read checkpoint " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("malformed checkpoint JSON: ") + e.what(), e.byte);
  }
  return checkpoint_from_json(doc);
}

}  // namespace rlpath
