#include <gtest/gtest.h>

#include <random>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "persistnet/geometry.hpp"

using namespace persistnet;
using fixtures::vec;

TEST(CosineDistance, IdenticalOrthogonalAntipodal) {
  EXPECT_NEAR(cosine_distance(vec({1, 2, 3}), vec({1, 2, 3})), 0.0, 1e-15);
  EXPECT_DOUBLE_EQ(cosine_distance(vec({1, 0}), vec({0, 1})), 1.0);
  EXPECT_DOUBLE_EQ(cosine_distance(vec({1, 0}), vec({-1, 0})), 2.0);
}

TEST(CosineDistance, ZeroNormRaises) {
  EXPECT_THROW(cosine_distance(vec({0, 0}), vec({1, 0})), ZeroNormInput);
  EXPECT_THROW(cosine_distance(vec({1, 0}), vec({1e-13, 0})), ZeroNormInput);
  EXPECT_NO_THROW(cosine_distance(vec({1, 0}), vec({1e-11, 0})));
}

TEST(CosineDistance, DimMismatch) {
  EXPECT_THROW(cosine_distance(vec({1, 0}), vec({1, 0, 0})), DimMismatch);
}

TEST(CosineDistance, ScaleInvarianceSymmetryRange) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> scale(1e-3, 1e3);
  for (int t = 0; t < 500; ++t) {
    const int dim = 2 + t % 30;
    const auto a = fixtures::random_vec(rng, dim);
    const auto b = fixtures::random_vec(rng, dim);
    const double d = cosine_distance(a, b);
    EXPECT_NEAR(cosine_distance(scale(rng) * a, scale(rng) * b), d, 1e-12);
    EXPECT_NEAR(cosine_distance(b, a), d, 1e-12);
    EXPECT_GE(d, 0.0);
    EXPECT_LE(d, 2.0);
    EXPECT_NEAR(d, oracle::cosine_distance(oracle::to_vec(a), oracle::to_vec(b)), 1e-12);
  }
}

TEST(TripletHinge, Examples) {
  EXPECT_EQ(triplet_hinge_loss({0.2, 0.5}, 0.1), 0.0);
  EXPECT_NEAR(triplet_hinge_loss({0.5, 0.2}, 0.1), 0.4, 1e-15);
  EXPECT_EQ(triplet_hinge_loss({0.3, 0.3}, 0.0), 0.0);
}

TEST(TripletHinge, NonnegativeAndZeroExactlyWhenInactive) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 2.0);
  for (int t = 0; t < 1000; ++t) {
    const TripletDistances d{u(rng), u(rng)};
    const double m = u(rng) / 4;
    const double l = triplet_hinge_loss(d, m);
    EXPECT_GE(l, 0.0);
    EXPECT_EQ(l == 0.0, d.d_pos - d.d_neg + m <= 0.0);
  }
}

TEST(CosineGrad, AlignedIsFlat) {
  auto [ga, gb] = cosine_distance_grad(vec({1, 0}), vec({1, 0}));
  EXPECT_EQ(ga, vec({0, 0}));
  EXPECT_EQ(gb, vec({0, 0}));
}

TEST(CosineGrad, OrthogonalHandValue) {
  auto [ga, gb] = cosine_distance_grad(vec({1, 0}), vec({0, 1}));
  EXPECT_NEAR(ga[0], 0.0, 1e-15);
  EXPECT_NEAR(ga[1], -1.0, 1e-15);
  EXPECT_NEAR(gb[0], -1.0, 1e-15);
  EXPECT_NEAR(gb[1], 0.0, 1e-15);
}

TEST(CosineGrad, MatchesFiniteDifferencesDim5) {
  std::mt19937_64 rng(3);
  const auto a = fixtures::random_vec(rng, 5);
  const auto b = fixtures::random_vec(rng, 5);
  auto [ga, gb] = cosine_distance_grad(a, b);
  const auto bv = oracle::to_vec(b);
  const auto av = oracle::to_vec(a);
  const auto na = oracle::central_diff([&](const oracle::Vec& x) { return oracle::cosine_distance(x, bv); },
                                       av, 1e-5);
  const auto nb = oracle::central_diff([&](const oracle::Vec& x) { return oracle::cosine_distance(av, x); },
                                       bv, 1e-5);
  EXPECT_LT(oracle::max_rel_err(oracle::to_vec(ga), na), 1e-6);
  EXPECT_LT(oracle::max_rel_err(oracle::to_vec(gb), nb), 1e-6);
}

TEST(TripletGrads, InactiveGivesZeros) {
  // d_pos = 0, d_neg = 2
  const auto g = triplet_loss_grads(vec({1, 0}), vec({2, 0}), vec({-1, 0}), 0.1);
  EXPECT_TRUE(g.anchor.isZero(0));
  EXPECT_TRUE(g.positive.isZero(0));
  EXPECT_TRUE(g.negative.isZero(0));
}

namespace {

double triplet_objective(const oracle::Vec& a, const oracle::Vec& p, const oracle::Vec& n, double m) {
  return std::max(0.0, oracle::cosine_distance(a, p) - oracle::cosine_distance(a, n) + m);
}

}  // namespace

TEST(TripletGrads, ActiveMatchesFiniteDifferencesDim8) {
  std::mt19937_64 rng(8);
  int checked = 0;
  while (checked < 20) {
    const auto a = fixtures::random_vec(rng, 8);
    const auto p = fixtures::random_vec(rng, 8);
    const auto n = fixtures::random_vec(rng, 8);
    const double m = 0.1;
    const double arg = cosine_distance(a, p) - cosine_distance(a, n) + m;
    if (arg < 1e-3) continue;  // keep clear of the kink for central differences
    const auto g = triplet_loss_grads(a, p, n, m);
    const auto av = oracle::to_vec(a), pv = oracle::to_vec(p), nv = oracle::to_vec(n);
    const auto fa = oracle::central_diff([&](const oracle::Vec& x) { return triplet_objective(x, pv, nv, m); }, av, 1e-5);
    const auto fp = oracle::central_diff([&](const oracle::Vec& x) { return triplet_objective(av, x, nv, m); }, pv, 1e-5);
    const auto fn = oracle::central_diff([&](const oracle::Vec& x) { return triplet_objective(av, pv, x, m); }, nv, 1e-5);
    EXPECT_LT(oracle::max_rel_err(oracle::to_vec(g.anchor), fa), 1e-6);
    EXPECT_LT(oracle::max_rel_err(oracle::to_vec(g.positive), fp), 1e-6);
    EXPECT_LT(oracle::max_rel_err(oracle::to_vec(g.negative), fn), 1e-6);
    ++checked;
  }
}

TEST(TripletGrads, BoundaryTakesActiveSide) {
  // a = (1,0), p = (3,4), n = (0,1): d_pos = 0.4, d_neg = 1, margin d_neg - d_pos
  const auto a = vec({1, 0}), p = vec({3, 4}), n = vec({0, 1});
  const double m = cosine_distance(a, n) - cosine_distance(a, p);
  ASSERT_EQ(cosine_distance(a, p) - cosine_distance(a, n) + m, 0.0);
  const auto g = triplet_loss_grads(a, p, n, m);
  EXPECT_FALSE(g.anchor.isZero(0));

  // one-sided difference into the active region reproduces the analytic slope
  const auto pv = oracle::to_vec(p), nv = oracle::to_vec(n);
  const double h = 1e-7;
  const auto fwd = [&](int i) {
    oracle::Vec x = oracle::to_vec(a);
    const double dir = g.anchor[i] >= 0 ? 1.0 : -1.0;
    x[i] += dir * h;
    return dir * (triplet_objective(x, pv, nv, m) - triplet_objective(oracle::to_vec(a), pv, nv, m)) / h;
  };
  for (int i = 0; i < 2; ++i) {
    if (std::abs(g.anchor[i]) < 1e-12) continue;
    EXPECT_NEAR(fwd(i), g.anchor[i], 1e-5);
  }
}

TEST(Gradients, RandomizedFiniteDifferenceSweep) {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<int> dim_of(2, 64);
  int trials = 0;
  while (trials < 100) {
    const int dim = dim_of(rng);
    const auto a = fixtures::random_vec(rng, dim);
    const auto b = fixtures::random_vec(rng, dim);
    const auto c = fixtures::random_vec(rng, dim);
    auto [ga, gb] = cosine_distance_grad(a, b);
    const auto av = oracle::to_vec(a), bv = oracle::to_vec(b), cv = oracle::to_vec(c);
    EXPECT_LT(oracle::max_rel_err(oracle::to_vec(ga),
                                  oracle::central_diff([&](const oracle::Vec& x) { return oracle::cosine_distance(x, bv); }, av, 1e-5),
                                  1e-6),
              1e-5);
    const double m = 0.5;
    if (cosine_distance(a, b) - cosine_distance(a, c) + m > 1e-3) {
      const auto g = triplet_loss_grads(a, b, c, m);
      EXPECT_LT(oracle::max_rel_err(oracle::to_vec(g.anchor),
                                    oracle::central_diff([&](const oracle::Vec& x) { return triplet_objective(x, bv, cv, m); }, av, 1e-5),
                                    1e-6),
                1e-5);
    }
    ++trials;
  }
}
