#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include <Eigen/Dense>

#include "persistnet/errors.hpp"

namespace persistnet {

/// Input features and embeddings alike. All reals are double.
using FeatureVector = Eigen::VectorXd;

inline constexpr double kZeroNormEpsilon = 1e-12;

inline bool all_finite(const FeatureVector& v) { return v.allFinite(); }

/// Distances of one triplet: D(anchor, positive) and D(anchor, negative).
struct TripletDistances {
  double d_pos = 0.0;
  double d_neg = 0.0;
};

namespace detail {

inline void require_same_dim(const FeatureVector& a, const FeatureVector& b,
                             const char* what) {
  if (a.size() != b.size()) {
    throw DimMismatch(static_cast<std::size_t>(a.size()),
                      static_cast<std::size_t>(b.size()), what);
  }
}

inline double checked_norm(const FeatureVector& v, double eps, const char* what) {
  const double n = v.norm();
  if (!(n >= eps)) {
    throw ZeroNormInput(std::string(what) + ": vector norm " + std::to_string(n) +
                        " below epsilon");
  }
  return n;
}

}  // namespace detail

/// 1 - a.b / (|a||b|), clamped to [0, 2].
inline double cosine_distance(const FeatureVector& a, const FeatureVector& b,
                              double eps = kZeroNormEpsilon) {
  detail::require_same_dim(a, b, "cosine_distance");
  detail::checked_norm(a, eps, "cosine_distance");
  detail::checked_norm(b, eps, "cosine_distance");
  // sqrt(|a|^2 |b|^2) keeps D(x, x) exactly zero
  const double cos = std::clamp(a.dot(b) / std::sqrt(a.squaredNorm() * b.squaredNorm()), -1.0, 1.0);
  return 1.0 - cos;
}

inline double triplet_hinge_loss(const TripletDistances& d, double margin) {
  return std::max(0.0, d.d_pos - d.d_neg + margin);
}

/// Gradients of cosine_distance with respect to both arguments.
inline std::pair<FeatureVector, FeatureVector> cosine_distance_grad(
    const FeatureVector& a, const FeatureVector& b, double eps = kZeroNormEpsilon) {
  detail::require_same_dim(a, b, "cosine_distance_grad");
  const double na = detail::checked_norm(a, eps, "cosine_distance_grad");
  const double nb = detail::checked_norm(b, eps, "cosine_distance_grad");
  const double dot = a.dot(b);
  const double inv = 1.0 / (na * nb);
  FeatureVector ga = -(b * inv - a * (dot * inv / (na * na)));
  FeatureVector gb = -(a * inv - b * (dot * inv / (nb * nb)));
  return {std::move(ga), std::move(gb)};
}

struct TripletGrads {
  FeatureVector anchor;
  FeatureVector positive;
  FeatureVector negative;
};

/// Gradient of max(0, D(a,p) - D(a,n) + margin) in the three embeddings.
/// Strictly inactive triplets give zeros; the boundary takes the active side.
inline TripletGrads triplet_loss_grads(const FeatureVector& anchor,
                                       const FeatureVector& positive,
                                       const FeatureVector& negative, double margin,
                                       double eps = kZeroNormEpsilon) {
  detail::require_same_dim(anchor, positive, "triplet_loss_grads");
  detail::require_same_dim(anchor, negative, "triplet_loss_grads");
  const TripletDistances d{cosine_distance(anchor, positive, eps),
                           cosine_distance(anchor, negative, eps)};
  const auto dim = anchor.size();
  if (d.d_pos - d.d_neg + margin < 0.0) {
    return {FeatureVector::Zero(dim), FeatureVector::Zero(dim), FeatureVector::Zero(dim)};
  }
  auto [gap, gp] = cosine_distance_grad(anchor, positive, eps);
  auto [gan, gn] = cosine_distance_grad(anchor, negative, eps);
  return {gap - gan, std::move(gp), -gn};
}

}  // namespace persistnet
