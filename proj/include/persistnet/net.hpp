#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "persistnet/errors.hpp"
#include "persistnet/geometry.hpp"
#include "persistnet/random.hpp"

namespace persistnet {

inline constexpr const char* kNetFormatVersion = "persistnet-net-v1";

enum class Activation { rectifier, identity };

inline const char* to_string(Activation a) {
  return a == Activation::rectifier ? "rectifier" : "identity";
}

inline Activation activation_from_string(const std::string& s) {
  if (s == "rectifier") return Activation::rectifier;
  if (s == "identity") return Activation::identity;
  throw FormatError(0, "unknown activation '" + s + "'");
}

struct Layer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;    // out
  Activation activation = Activation::identity;

  Eigen::Index in() const { return weight.cols(); }
  Eigen::Index out() const { return weight.rows(); }
};

/// Fully connected embedding f(x). Hidden layers are rectified, the last is linear.
struct EmbeddingNet {
  std::vector<Layer> layers;

  std::size_t input_dim() const { return layers.empty() ? 0 : layers.front().in(); }
  std::size_t output_dim() const { return layers.empty() ? 0 : layers.back().out(); }

  std::vector<int> layer_dims() const {
    std::vector<int> dims;
    if (layers.empty()) return dims;
    dims.push_back(static_cast<int>(layers.front().in()));
    for (const auto& l : layers) dims.push_back(static_cast<int>(l.out()));
    return dims;
  }

  std::size_t num_parameters() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.weight.size() + l.bias.size();
    return n;
  }

  void check() const {
    if (layers.empty()) throw DimMismatch("network has no layers");
    for (std::size_t k = 0; k < layers.size(); ++k) {
      const Layer& l = layers[k];
      if (l.bias.size() != l.out()) {
        throw DimMismatch(l.out(), l.bias.size(), "layer " + std::to_string(k) + " bias");
      }
      if (k + 1 < layers.size() && layers[k + 1].in() != l.out()) {
        throw DimMismatch(l.out(), layers[k + 1].in(), "layer " + std::to_string(k + 1) + " input");
      }
      if (!l.weight.allFinite() || !l.bias.allFinite()) {
        throw NonFiniteValue("layer " + std::to_string(k) + " has non-finite parameters");
      }
    }
  }

  friend bool operator==(const EmbeddingNet& a, const EmbeddingNet& b) {
    if (a.layers.size() != b.layers.size()) return false;
    for (std::size_t k = 0; k < a.layers.size(); ++k) {
      const Layer& x = a.layers[k];
      const Layer& y = b.layers[k];
      if (x.activation != y.activation || x.weight.rows() != y.weight.rows() ||
          x.weight.cols() != y.weight.cols() || x.weight != y.weight || x.bias != y.bias) {
        return false;
      }
    }
    return true;
  }
};

/// Glorot-uniform weights in [-s, s], s = sqrt(6 / (in + out)); zero biases.
inline EmbeddingNet init_net(const std::vector<int>& layer_dims, std::uint64_t seed) {
  if (layer_dims.size() < 2) throw DimMismatch("init_net needs at least input and output dims");
  for (int d : layer_dims) {
    if (d < 1) throw DimMismatch("init_net: layer dims must be >= 1");
  }
  Rng rng(seed);
  EmbeddingNet net;
  for (std::size_t k = 0; k + 1 < layer_dims.size(); ++k) {
    const int in = layer_dims[k];
    const int out = layer_dims[k + 1];
    const double s = std::sqrt(6.0 / (in + out));
    std::uniform_real_distribution<double> u(-s, s);
    Layer l;
    l.weight.resize(out, in);
    for (int r = 0; r < out; ++r)
      for (int c = 0; c < in; ++c) l.weight(r, c) = u(rng);
    l.bias = Eigen::VectorXd::Zero(out);
    l.activation = (k + 2 == layer_dims.size()) ? Activation::identity : Activation::rectifier;
    net.layers.push_back(std::move(l));
  }
  return net;
}

/// Layer inputs and pre-activations kept for backpropagation.
struct ForwardTrace {
  std::vector<Eigen::VectorXd> inputs;  // inputs[k] feeds layer k
  std::vector<Eigen::VectorXd> pre;     // pre[k] = W_k inputs[k] + b_k
  Eigen::VectorXd output;
};

inline ForwardTrace forward_trace(const EmbeddingNet& net, const FeatureVector& x) {
  if (static_cast<std::size_t>(x.size()) != net.input_dim()) {
    throw DimMismatch(net.input_dim(), static_cast<std::size_t>(x.size()), "forward input");
  }
  ForwardTrace t;
  t.inputs.reserve(net.layers.size());
  t.pre.reserve(net.layers.size());
  Eigen::VectorXd h = x;
  for (const Layer& l : net.layers) {
    t.inputs.push_back(h);
    Eigen::VectorXd z = l.weight * h + l.bias;
    h = l.activation == Activation::rectifier ? Eigen::VectorXd(z.cwiseMax(0.0)) : z;
    t.pre.push_back(std::move(z));
  }
  t.output = std::move(h);
  return t;
}

inline FeatureVector forward(const EmbeddingNet& net, const FeatureVector& x) {
  if (static_cast<std::size_t>(x.size()) != net.input_dim()) {
    throw DimMismatch(net.input_dim(), static_cast<std::size_t>(x.size()), "forward input");
  }
  Eigen::VectorXd h = x;
  for (const Layer& l : net.layers) {
    Eigen::VectorXd z = l.weight * h + l.bias;
    h = l.activation == Activation::rectifier ? Eigen::VectorXd(z.cwiseMax(0.0)) : std::move(z);
  }
  return h;
}

/// f(x) for every input, in order.
inline std::vector<FeatureVector> embed_all(const EmbeddingNet& net,
                                            const std::vector<FeatureVector>& inputs) {
  std::vector<FeatureVector> out;
  out.reserve(inputs.size());
  for (const auto& x : inputs) out.push_back(forward(net, x));
  return out;
}

// ---------------------------------------------------------------------------
// Training configuration

struct TrainConfig {
  double margin = 0.1;
  double weight_decay = 0.0005;
  double base_lr = 0.01;
  double lr_drop_factor = 10.0;
  int lr_drop_every = 2000;
  double momentum = 0.9;
  int total_iters = 5000;
  int batch_positive_pairs = 16;
  int hard_negatives_per_pair = 2;
  int random_negatives_per_pair = 2;
  std::uint64_t seed = 7;

  void check() const {
    if (!(margin >= 0)) throw ConfigError("train.margin must be >= 0");
    if (!(weight_decay >= 0)) throw ConfigError("train.weight_decay must be >= 0");
    if (!(base_lr > 0)) throw ConfigError("train.base_lr must be > 0");
    if (!(lr_drop_factor > 1)) throw ConfigError("train.lr_drop_factor must be > 1");
    if (lr_drop_every < 1) throw ConfigError("train.lr_drop_every must be >= 1");
    if (!(momentum >= 0 && momentum < 1)) throw ConfigError("train.momentum must be in [0,1)");
    if (total_iters < 0) throw ConfigError("train.total_iters must be >= 0");
    if (batch_positive_pairs < 1) throw ConfigError("train.batch_positive_pairs must be >= 1");
    if (hard_negatives_per_pair < 0 || random_negatives_per_pair < 0) {
      throw ConfigError("train negatives per pair must be >= 0");
    }
  }
};

inline void to_json(nlohmann::ordered_json& j, const TrainConfig& c) {
  j = nlohmann::ordered_json{{"margin", c.margin},
                             {"weight_decay", c.weight_decay},
                             {"base_lr", c.base_lr},
                             {"lr_drop_factor", c.lr_drop_factor},
                             {"lr_drop_every", c.lr_drop_every},
                             {"momentum", c.momentum},
                             {"total_iters", c.total_iters},
                             {"batch_positive_pairs", c.batch_positive_pairs},
                             {"hard_negatives_per_pair", c.hard_negatives_per_pair},
                             {"random_negatives_per_pair", c.random_negatives_per_pair},
                             {"seed", c.seed}};
}

// ---------------------------------------------------------------------------
// persistnet-net-v1 checkpoints

inline nlohmann::ordered_json net_to_json(const EmbeddingNet& net, const TrainConfig& cfg) {
  nlohmann::ordered_json j;
  j["version"] = kNetFormatVersion;
  j["layer_dims"] = net.layer_dims();
  auto layers = nlohmann::ordered_json::array();
  for (const Layer& l : net.layers) {
    nlohmann::ordered_json jl;
    jl["in"] = l.in();
    jl["out"] = l.out();
    jl["activation"] = to_string(l.activation);
    std::vector<double> w;
    w.reserve(l.weight.size());
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) w.push_back(l.weight(r, c));
    jl["weight"] = std::move(w);
    jl["bias"] = std::vector<double>(l.bias.data(), l.bias.data() + l.bias.size());
    layers.push_back(std::move(jl));
  }
  j["layers"] = std::move(layers);
  j["train_config"] = cfg;
  return j;
}

inline EmbeddingNet net_from_json(const nlohmann::json& j) {
  try {
    if (j.at("version").get<std::string>() != kNetFormatVersion) {
      throw FormatError(0, "unsupported checkpoint version " + j.at("version").dump());
    }
    EmbeddingNet net;
    for (const auto& jl : j.at("layers")) {
      const auto in = jl.at("in").get<Eigen::Index>();
      const auto out = jl.at("out").get<Eigen::Index>();
      const auto w = jl.at("weight").get<std::vector<double>>();
      const auto b = jl.at("bias").get<std::vector<double>>();
      if (in < 1 || out < 1 || static_cast<Eigen::Index>(w.size()) != in * out ||
          static_cast<Eigen::Index>(b.size()) != out) {
        throw FormatError(0, "layer array sizes do not match in/out");
      }
      Layer l;
      l.weight = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
          w.data(), out, in);
      l.bias = Eigen::Map<const Eigen::VectorXd>(b.data(), out);
      l.activation = activation_from_string(jl.at("activation").get<std::string>());
      net.layers.push_back(std::move(l));
    }
    net.check();
    return net;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(0, std::string("bad checkpoint: ") + e.what());
  } catch (const DimMismatch& e) {
    throw FormatError(0, std::string("bad checkpoint: ") + e.what());
  }
}

inline void save_net(const EmbeddingNet& net, const TrainConfig& cfg, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path);
  os << net_to_json(net, cfg).dump(1) << '\n';
  if (!os) throw IoError("write failed: " + path);
}

inline EmbeddingNet load_net(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open for reading: " + path);
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(0, std::string("checkpoint is not valid JSON: ") + e.what());
  }
  return net_from_json(j);
}

}  // namespace persistnet
