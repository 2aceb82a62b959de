#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "persistnet/dataset.hpp"
#include "persistnet/errors.hpp"
#include "persistnet/geometry.hpp"
#include "persistnet/net.hpp"
#include "persistnet/random.hpp"
#include "persistnet/triplets.hpp"

namespace persistnet {

/// Parameter-shaped buffer: gradients or momentum velocities.
struct LayerParams {
  Eigen::MatrixXd weight;
  Eigen::VectorXd bias;
};

struct NetGradients {
  std::vector<LayerParams> layers;

  static NetGradients zeros_like(const EmbeddingNet& net) {
    NetGradients g;
    g.layers.reserve(net.layers.size());
    for (const Layer& l : net.layers) {
      g.layers.push_back({Eigen::MatrixXd::Zero(l.out(), l.in()), Eigen::VectorXd::Zero(l.out())});
    }
    return g;
  }

  bool all_finite() const {
    return std::all_of(layers.begin(), layers.end(), [](const LayerParams& p) {
      return p.weight.allFinite() && p.bias.allFinite();
    });
  }
};

struct OptimizerState {
  NetGradients velocity;
  std::int64_t iter = 0;

  static OptimizerState for_net(const EmbeddingNet& net) {
    return {NetGradients::zeros_like(net), 0};
  }
};

/// base_lr / drop_factor^floor(iter / drop_every)
inline double lr_at(const TrainConfig& cfg, std::int64_t iter) {
  const auto drops = iter / cfg.lr_drop_every;
  return cfg.base_lr / std::pow(cfg.lr_drop_factor, static_cast<double>(drops));
}

struct BatchResult {
  NetGradients grads;
  double mean_loss = 0.0;           // hinge terms only
  double fraction_active = 0.0;     // triplets with d_pos - d_neg + M >= 0
};

inline double weight_penalty(const EmbeddingNet& net, double weight_decay) {
  double s = 0.0;
  for (const Layer& l : net.layers) s += l.weight.squaredNorm();
  return 0.5 * weight_decay * s;
}

namespace detail {

inline void require_batch_fits(const EmbeddingNet& net, const TripletBatch& batch,
                               const MultiViewDataset& d) {
  if (net.input_dim() != d.feature_dim) {
    throw DimMismatch(net.input_dim(), d.feature_dim, "network input vs dataset features");
  }
  for (const Triplet& t : batch.triplets) {
    if (t.anchor >= d.size() || t.positive >= d.size() || t.negative >= d.size()) {
      throw Error("triplet index out of range for dataset");
    }
  }
}

}  // namespace detail

/// Mean hinge loss over the batch; the weight penalty is not included.
inline double batch_loss(const EmbeddingNet& net, const TripletBatch& batch,
                         const MultiViewDataset& d, double margin) {
  detail::require_batch_fits(net, batch, d);
  if (batch.triplets.empty()) return 0.0;
  std::map<std::size_t, FeatureVector> emb;
  auto embed = [&](std::size_t i) -> const FeatureVector& {
    auto it = emb.find(i);
    if (it == emb.end()) it = emb.emplace(i, forward(net, d.records[i].features)).first;
    return it->second;
  };
  double total = 0.0;
  for (const Triplet& t : batch.triplets) {
    const FeatureVector& a = embed(t.anchor);
    total += triplet_hinge_loss({cosine_distance(a, embed(t.positive)),
                                 cosine_distance(a, embed(t.negative))},
                                margin);
  }
  return total / static_cast<double>(batch.triplets.size());
}

/// Full training objective: (lambda/2) sum ||W||^2 + mean hinge.
inline double objective(const EmbeddingNet& net, const TripletBatch& batch,
                        const MultiViewDataset& d, const TrainConfig& cfg) {
  return weight_penalty(net, cfg.weight_decay) + batch_loss(net, batch, d, cfg.margin);
}

/// Gradient of `objective` by backpropagation. Each distinct record is pushed
/// through the net once; output gradients are reduced in triplet order and
/// backpropagated in ascending record order.
inline BatchResult backward_batch(const EmbeddingNet& net, const TripletBatch& batch,
                                  const MultiViewDataset& d, const TrainConfig& cfg) {
  detail::require_batch_fits(net, batch, d);
  BatchResult res{NetGradients::zeros_like(net), 0.0, 0.0};

  if (!batch.triplets.empty()) {
    std::map<std::size_t, ForwardTrace> traces;
    auto trace = [&](std::size_t i) -> const ForwardTrace& {
      auto it = traces.find(i);
      if (it == traces.end()) it = traces.emplace(i, forward_trace(net, d.records[i].features)).first;
      return it->second;
    };

    const double inv_n = 1.0 / static_cast<double>(batch.triplets.size());
    std::map<std::size_t, Eigen::VectorXd> out_grad;
    auto accumulate = [&](std::size_t i, const FeatureVector& g) {
      auto it = out_grad.find(i);
      if (it == out_grad.end()) {
        out_grad.emplace(i, g * inv_n);
      } else {
        it->second += g * inv_n;
      }
    };

    double total = 0.0;
    std::size_t active = 0;
    for (const Triplet& t : batch.triplets) {
      const FeatureVector& fa = trace(t.anchor).output;
      const FeatureVector& fp = trace(t.positive).output;
      const FeatureVector& fn = trace(t.negative).output;
      const double arg = cosine_distance(fa, fp) - cosine_distance(fa, fn) + cfg.margin;
      total += std::max(0.0, arg);
      if (arg < 0.0) continue;
      ++active;
      TripletGrads g = triplet_loss_grads(fa, fp, fn, cfg.margin);
      accumulate(t.anchor, g.anchor);
      accumulate(t.positive, g.positive);
      accumulate(t.negative, g.negative);
    }
    res.mean_loss = total * inv_n;
    res.fraction_active = static_cast<double>(active) * inv_n;

    for (const auto& [rec, g_out] : out_grad) {
      const ForwardTrace& tr = traces.at(rec);
      Eigen::VectorXd delta = g_out;
      for (std::size_t k = net.layers.size(); k-- > 0;) {
        const Layer& l = net.layers[k];
        if (l.activation == Activation::rectifier) {
          delta = (tr.pre[k].array() > 0.0).select(delta, 0.0);
        }
        res.grads.layers[k].weight.noalias() += delta * tr.inputs[k].transpose();
        res.grads.layers[k].bias += delta;
        if (k > 0) delta = l.weight.transpose() * delta;
      }
    }
  }

  if (cfg.weight_decay != 0.0) {
    for (std::size_t k = 0; k < net.layers.size(); ++k) {
      res.grads.layers[k].weight += cfg.weight_decay * net.layers[k].weight;
    }
  }
  return res;
}

/// v <- momentum v - lr grad; param <- param + v; iter += 1.
inline void sgd_step(EmbeddingNet& net, const NetGradients& grads, OptimizerState& state,
                     const TrainConfig& cfg) {
  if (grads.layers.size() != net.layers.size() || state.velocity.layers.size() != net.layers.size()) {
    throw DimMismatch(net.layers.size(), grads.layers.size(), "sgd_step layer count");
  }
  const double lr = lr_at(cfg, state.iter);
  for (std::size_t k = 0; k < net.layers.size(); ++k) {
    LayerParams& v = state.velocity.layers[k];
    const LayerParams& g = grads.layers[k];
    v.weight = cfg.momentum * v.weight - lr * g.weight;
    v.bias = cfg.momentum * v.bias - lr * g.bias;
    net.layers[k].weight += v.weight;
    net.layers[k].bias += v.bias;
  }
  ++state.iter;
}

// ---------------------------------------------------------------------------

struct TrainLogEntry {
  std::int64_t iter = 0;
  double lr = 0.0;
  double mean_batch_loss = 0.0;
  double fraction_active_triplets = 0.0;
  std::size_t triplets = 0;

  friend bool operator==(const TrainLogEntry&, const TrainLogEntry&) = default;
};

struct TrainLog {
  std::vector<TrainLogEntry> entries;

  friend bool operator==(const TrainLog&, const TrainLog&) = default;
};

inline void write_train_log_csv(const TrainLog& log, std::ostream& os) {
  os << "iter,lr,mean_batch_loss,fraction_active_triplets,triplets\n";
  char buf[160];
  for (const auto& e : log.entries) {
    std::snprintf(buf, sizeof buf, "%lld,%.17g,%.17g,%.17g,%zu\n", static_cast<long long>(e.iter),
                  e.lr, e.mean_batch_loss, e.fraction_active_triplets, e.triplets);
    os << buf;
  }
}

struct TrainResult {
  EmbeddingNet net;
  TrainLog log;
};

/// Seeds derived from cfg.seed: network init uses sub-stream {0}, the batch of
/// iteration i uses {1, i}.
inline std::uint64_t init_seed(const TrainConfig& cfg) { return derive_seed(cfg.seed, {0}); }

inline std::uint64_t batch_seed(const TrainConfig& cfg, std::int64_t iter) {
  return derive_seed(cfg.seed, {1, static_cast<std::uint64_t>(iter)});
}

/// Checks the dataset can feed the triplet sampler: some object with two
/// views, and every category that supplies anchors has a second object.
inline void check_trainable(const DatasetIndex& idx) {
  const auto eligible = eligible_anchor_objects(idx);
  if (eligible.empty()) throw InsufficientViews("no object in the training set has two views");
  for (int o : eligible) {
    const int c = idx.category_of_object[o];
    if (idx.objects_of_category[c].size() < 2) {
      throw InsufficientObjects("category " + idx.category_ids[c] + " has fewer than 2 objects");
    }
  }
}

using TrainObserver = std::function<void(const TrainLogEntry&, const EmbeddingNet&)>;

inline TrainResult train(const MultiViewDataset& d, const std::vector<int>& layer_dims,
                         const TrainConfig& cfg, const TrainObserver& observer = {}) {
  cfg.check();
  if (d.empty()) throw InsufficientViews("training set is empty");
  if (layer_dims.empty() || static_cast<std::size_t>(layer_dims.front()) != d.feature_dim) {
    throw DimMismatch(d.feature_dim, layer_dims.empty() ? 0 : layer_dims.front(),
                      "network input vs dataset features");
  }
  const DatasetIndex idx(d);
  EmbeddingNet net = init_net(layer_dims, init_seed(cfg));
  TrainResult out{net, {}};
  if (cfg.total_iters == 0) {
    out.net = std::move(net);
    return out;
  }
  check_trainable(idx);

  OptimizerState state = OptimizerState::for_net(net);
  out.log.entries.reserve(static_cast<std::size_t>(cfg.total_iters));
  for (std::int64_t it = 0; it < cfg.total_iters; ++it) {
    const TripletBatch batch = build_batch(net, d, idx, cfg, batch_seed(cfg, it));
    BatchResult br = backward_batch(net, batch, d, cfg);
    if (!std::isfinite(br.mean_loss) || !br.grads.all_finite()) {
      throw NonFiniteValue("non-finite loss or gradient at iteration " + std::to_string(it));
    }
    TrainLogEntry e{it, lr_at(cfg, state.iter), br.mean_loss, br.fraction_active,
                    batch.triplets.size()};
    sgd_step(net, br.grads, state, cfg);
    out.log.entries.push_back(e);
    if (observer) observer(e, net);
  }
  out.net = std::move(net);
  return out;
}

// ---------------------------------------------------------------------------

/// Denominator floor for relative errors of near-zero gradient entries.
inline constexpr double kGradCheckFloor = 1e-6;

/// Central differences of `objective` against backward_batch over every
/// parameter; returns max |analytic - numeric| / max(|analytic|, |numeric|, floor).
inline double gradient_check(const EmbeddingNet& net, const TripletBatch& batch,
                             const MultiViewDataset& d, const TrainConfig& cfg, double step) {
  if (!(step > 0)) throw ConfigError("gradient_check step must be > 0");
  const NetGradients analytic = backward_batch(net, batch, d, cfg).grads;
  EmbeddingNet probe = net;
  double worst = 0.0;
  auto check_one = [&](double& param, double a) {
    const double saved = param;
    param = saved + step;
    const double fp = objective(probe, batch, d, cfg);
    param = saved - step;
    const double fm = objective(probe, batch, d, cfg);
    param = saved;
    const double numeric = (fp - fm) / (2.0 * step);
    const double denom = std::max({std::abs(a), std::abs(numeric), kGradCheckFloor});
    worst = std::max(worst, std::abs(a - numeric) / denom);
  };
  for (std::size_t k = 0; k < probe.layers.size(); ++k) {
    Layer& l = probe.layers[k];
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c)
        check_one(l.weight(r, c), analytic.layers[k].weight(r, c));
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) check_one(l.bias[r], analytic.layers[k].bias[r]);
  }
  return worst;
}

}  // namespace persistnet
