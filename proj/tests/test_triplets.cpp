#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <set>

#include "fixtures.hpp"
#include "persistnet/triplets.hpp"

using namespace persistnet;
using fixtures::vec;

namespace {

EmbeddingNet identity_net(int dim) {
  EmbeddingNet net;
  net.layers.push_back({Eigen::MatrixXd::Identity(dim, dim), Eigen::VectorXd::Zero(dim), Activation::identity});
  return net;
}

/// Unit vector at the angle whose cosine distance from (1, 0) is `d`.
FeatureVector at_distance(double d) {
  const double t = std::acos(1.0 - d);
  return vec({std::cos(t), std::sin(t)});
}

double loss_of(const MultiViewDataset& d, std::size_t a, std::size_t p, std::size_t n, double m) {
  const auto& r = d.records;
  return triplet_hinge_loss({cosine_distance(r[a].features, r[p].features),
                             cosine_distance(r[a].features, r[n].features)},
                            m);
}

}  // namespace

TEST(PositivePairs, SingleObjectForcesPair) {
  MultiViewDataset d{2, 2, {{"o", "c", 0, vec({1, 0})}, {"o", "c", 1, vec({0, 1})}}};
  for (const auto& p : sample_positive_pairs(d, 50, 3)) {
    EXPECT_TRUE((p.anchor == 0 && p.positive == 1) || (p.anchor == 1 && p.positive == 0));
  }
}

TEST(PositivePairs, SingleViewObjectsNeverChosen) {
  MultiViewDataset d{2, 2,
                     {{"A", "c", 0, vec({1, 0})}, {"A", "c", 1, vec({0, 1})}, {"B", "c", 0, vec({1, 1})}}};
  for (const auto& p : sample_positive_pairs(d, 200, 9)) {
    EXPECT_NE(p.anchor, 2u);
    EXPECT_NE(p.positive, 2u);
  }
  MultiViewDataset none{2, 1, {{"A", "c", 0, vec({1, 0})}, {"B", "c", 0, vec({0, 1})}}};
  EXPECT_THROW(sample_positive_pairs(none, 1, 1), InsufficientViews);
}

TEST(PositivePairs, ObjectFrequenciesAreUniform) {
  // 10^4 draws over 4 eligible objects: each count ~ Binomial(n, 1/4)
  const auto d = fixtures::random_dataset(2, 2, 3, 3, 1);
  const DatasetIndex idx(d);
  const int n = 10000;
  std::map<int, int> counts;
  std::map<int, int> view_counts;
  for (const auto& p : sample_positive_pairs(idx, n, 77)) {
    ASSERT_EQ(idx.object_of_record[p.anchor], idx.object_of_record[p.positive]);
    ASSERT_NE(p.anchor, p.positive);
    ++counts[idx.object_of_record[p.anchor]];
    ++view_counts[d.records[p.anchor].view_index];
  }
  ASSERT_EQ(counts.size(), 4u);
  const double sd = std::sqrt(n * 0.25 * 0.75);
  for (const auto& [obj, c] : counts) EXPECT_LT(std::abs(c - n * 0.25), 3 * sd) << "object " << obj;
  const double vsd = std::sqrt(n * (1.0 / 3) * (2.0 / 3));
  for (const auto& [v, c] : view_counts) EXPECT_LT(std::abs(c - n / 3.0), 3 * vsd) << "view " << v;
}

TEST(PositivePairs, Deterministic) {
  const auto d = fixtures::random_dataset(3, 3, 4, 3, 2);
  const auto a = sample_positive_pairs(d, 40, 5);
  const auto b = sample_positive_pairs(d, 40, 5);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].anchor, b[i].anchor);
    EXPECT_EQ(a[i].positive, b[i].positive);
  }
}

class MineNegatives : public ::testing::Test {
 protected:
  // records: 0 anchor, 1 positive (d_pos = 0.5), then candidates
  MultiViewDataset d{2, 2, {}};
  const EmbeddingNet net = identity_net(2);
  const double margin = 0.1;

  void SetUp() override {
    d.records.push_back({"a", "c", 0, vec({1, 0})});
    d.records.push_back({"a", "c", 1, at_distance(0.5)});
  }
  std::size_t add(const std::string& obj, double d_neg) {
    d.records.push_back({obj, "c", static_cast<int>(d.records.size() % 2), at_distance(d_neg)});
    return d.records.size() - 1;
  }
};

TEST_F(MineNegatives, TakeAll) {
  const auto x = add("b", 0.3);
  const auto y = add("b", 0.9);
  const auto got = mine_negatives(net, {0, 1}, {x, y}, d, margin, 2, 0, 1);
  EXPECT_EQ(std::set<std::size_t>(got.begin(), got.end()), (std::set<std::size_t>{x, y}));
}

TEST_F(MineNegatives, PicksHighestLosses) {
  // losses 0.0, 0.4, 0.1 in record order
  const auto zero = add("b", 0.6);
  const auto big = add("b", 0.2);
  const auto small = add("d", 0.5);
  ASSERT_NEAR(loss_of(d, 0, 1, big, margin), 0.4, 1e-12);
  ASSERT_NEAR(loss_of(d, 0, 1, small, margin), 0.1, 1e-12);
  ASSERT_NEAR(loss_of(d, 0, 1, zero, margin), 0.0, 1e-12);
  const auto got = mine_negatives(net, {0, 1}, {zero, big, small}, d, margin, 2, 0, 1);
  EXPECT_EQ(got, (std::vector<std::size_t>{big, small}));
}

TEST_F(MineNegatives, TiesGoToLowestRecord) {
  const auto x = add("b", 0.4);
  const auto y = add("d", 0.4);
  const auto z = add("e", 0.4);
  EXPECT_EQ(mine_negatives(net, {0, 1}, {z, y, x}, d, margin, 1, 0, 1), (std::vector<std::size_t>{x}));
}

TEST_F(MineNegatives, RandomFromRemainderWithoutReplacement) {
  std::vector<std::size_t> cands;
  for (int i = 0; i < 8; ++i) cands.push_back(add("b" + std::to_string(i), 0.1 + 0.2 * i));
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto got = mine_negatives(net, {0, 1}, cands, d, margin, 2, 4, seed);
    ASSERT_EQ(got.size(), 6u);
    // hardest = smallest d_neg = first two candidates
    EXPECT_EQ(got[0], cands[0]);
    EXPECT_EQ(got[1], cands[1]);
    const std::set<std::size_t> uniq(got.begin(), got.end());
    EXPECT_EQ(uniq.size(), 6u);
    EXPECT_EQ(got, mine_negatives(net, {0, 1}, cands, d, margin, 2, 4, seed));
  }
}

TEST_F(MineNegatives, WithReplacementWhenRemainderTooSmall) {
  const auto x = add("b", 0.3);
  const auto y = add("b", 0.9);
  const auto got = mine_negatives(net, {0, 1}, {x, y}, d, margin, 1, 5, 4);
  ASSERT_EQ(got.size(), 6u);
  for (auto g : got) EXPECT_TRUE(g == x || g == y);
}

TEST_F(MineNegatives, EmptyCandidates) {
  EXPECT_THROW(mine_negatives(net, {0, 1}, {}, d, margin, 2, 2, 1), NoValidNegatives);
}

TEST(MineNegativesProperty, HardNegativesDominate) {
  std::mt19937_64 rng(6);
  const auto net = init_net({5, 4}, 3);
  for (int t = 0; t < 100; ++t) {
    MultiViewDataset d{5, 2, {}};
    d.records.push_back({"a", "c", 0, fixtures::random_vec(rng, 5)});
    d.records.push_back({"a", "c", 1, fixtures::random_vec(rng, 5)});
    std::vector<std::size_t> cands;
    for (int i = 0; i < 10; ++i) {
      d.records.push_back({"b" + std::to_string(i), "c", 0, fixtures::random_vec(rng, 5)});
      cands.push_back(d.records.size() - 1);
    }
    const auto got = mine_negatives(net, {0, 1}, cands, d, 0.1, 3, 0, 1);
    auto loss = [&](std::size_t i) {
      const auto a = forward(net, d.records[0].features);
      return triplet_hinge_loss({cosine_distance(a, forward(net, d.records[1].features)),
                                 cosine_distance(a, forward(net, d.records[i].features))},
                                0.1);
    };
    double min_sel = 1e9, max_rest = -1e9;
    for (auto g : got) min_sel = std::min(min_sel, loss(g));
    for (auto c : cands)
      if (std::find(got.begin(), got.end(), c) == got.end()) max_rest = std::max(max_rest, loss(c));
    EXPECT_GE(min_sel, max_rest);
  }
}

TEST(BuildBatch, OnePairFourTriplets) {
  const auto d = fixtures::random_dataset(2, 3, 4, 6, 12);
  TrainConfig cfg;
  cfg.batch_positive_pairs = 1;
  cfg.hard_negatives_per_pair = 2;
  cfg.random_negatives_per_pair = 2;
  const auto batch = build_batch(init_net({6, 4}, 1), d, cfg, 5);
  ASSERT_EQ(batch.triplets.size(), 4u);
  for (const auto& t : batch.triplets) {
    EXPECT_EQ(t.anchor, batch.triplets[0].anchor);
    EXPECT_EQ(t.positive, batch.triplets[0].positive);
  }
  validate_batch(batch, d);
}

TEST(BuildBatch, TwoObjectCategoryUsesTheOtherObject) {
  const auto d = fixtures::random_dataset(1, 2, 5, 6, 13);
  TrainConfig cfg;
  cfg.batch_positive_pairs = 6;
  const auto batch = build_batch(init_net({6, 4}, 1), d, cfg, 8);
  for (const auto& t : batch.triplets) {
    EXPECT_NE(d.records[t.negative].object_id, d.records[t.anchor].object_id);
  }
  validate_batch(batch, d);
}

TEST(BuildBatch, ConstraintsHoldAndDeterministic) {
  const auto d = persistnet::generate(fixtures::small_generator());
  const DatasetIndex idx(d);
  const auto net = init_net({12, 8}, 2);
  TrainConfig cfg;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto b = build_batch(net, d, idx, cfg, seed);
    ASSERT_EQ(b.triplets.size(), 16u * 4u);
    for (const auto& t : b.triplets) ASSERT_TRUE(is_valid_triplet(t, d));
    ASSERT_TRUE(b == build_batch(net, d, idx, cfg, seed));
  }
}

TEST(BuildBatch, SingleObjectCategoryRaises) {
  const auto d = fixtures::random_dataset(2, 1, 3, 4, 1);
  EXPECT_THROW(build_batch(init_net({4, 3}, 1), d, TrainConfig{}, 1), InsufficientObjects);
}

TEST(ValidateBatch, FlagsViolations) {
  const auto d = fixtures::random_dataset(2, 2, 2, 3, 1);
  // records: c0o0v0=0, c0o0v1=1, c0o1v0=2, c0o1v1=3, c1o0v0=4 ...
  EXPECT_TRUE(is_valid_triplet({0, 1, 2}, d));
  EXPECT_FALSE(is_valid_triplet({0, 0, 2}, d));  // same view
  EXPECT_FALSE(is_valid_triplet({0, 2, 3}, d));  // positive from another object
  EXPECT_FALSE(is_valid_triplet({0, 1, 4}, d));  // negative from another category
  EXPECT_FALSE(is_valid_triplet({0, 1, 1}, d));  // negative from the same object
  EXPECT_FALSE(is_valid_triplet({0, 1, 99}, d));
  EXPECT_THROW(validate_batch(TripletBatch{{{0, 1, 4}}}, d), Error);
}
