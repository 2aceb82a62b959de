#pragma once

// Object-persistence triplets: two views of one object against a view of a
// different object from the same category, with in-batch hard-negative mining.

#include <algorithm>
#include <cstdint>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "persistnet/dataset.hpp"
#include "persistnet/errors.hpp"
#include "persistnet/geometry.hpp"
#include "persistnet/net.hpp"
#include "persistnet/random.hpp"

namespace persistnet {

struct PositivePair {
  std::size_t anchor = 0;
  std::size_t positive = 0;
};

struct Triplet {
  std::size_t anchor = 0;
  std::size_t positive = 0;
  std::size_t negative = 0;

  friend bool operator==(const Triplet&, const Triplet&) = default;
};

struct TripletBatch {
  std::vector<Triplet> triplets;

  friend bool operator==(const TripletBatch&, const TripletBatch&) = default;
};

/// Pool records drawn per pair when building a batch.
inline constexpr int kPoolRecordsPerPair = 4;

/// True when the triplet satisfies the object-persistence constraint.
inline bool is_valid_triplet(const Triplet& t, const MultiViewDataset& d) {
  const std::size_t n = d.size();
  if (t.anchor >= n || t.positive >= n || t.negative >= n) return false;
  const Record& a = d.records[t.anchor];
  const Record& p = d.records[t.positive];
  const Record& q = d.records[t.negative];
  return a.object_id == p.object_id && a.view_index != p.view_index &&
         a.category_id == q.category_id && a.object_id != q.object_id;
}

inline void validate_batch(const TripletBatch& b, const MultiViewDataset& d) {
  for (std::size_t i = 0; i < b.triplets.size(); ++i) {
    if (!is_valid_triplet(b.triplets[i], d)) {
      throw Error("triplet " + std::to_string(i) + " violates the object-persistence constraint");
    }
  }
}

/// Objects with at least two views, by DatasetIndex object number.
inline std::vector<int> eligible_anchor_objects(const DatasetIndex& idx) {
  std::vector<int> out;
  for (std::size_t o = 0; o < idx.num_objects(); ++o) {
    if (idx.records_of_object[o].size() >= 2) out.push_back(static_cast<int>(o));
  }
  return out;
}

inline std::vector<PositivePair> sample_positive_pairs(const DatasetIndex& idx, int n,
                                                       std::uint64_t seed) {
  const std::vector<int> eligible = eligible_anchor_objects(idx);
  if (eligible.empty()) throw InsufficientViews("no object has at least two views");
  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> pick_obj(0, eligible.size() - 1);
  std::vector<PositivePair> pairs;
  pairs.reserve(static_cast<std::size_t>(std::max(n, 0)));
  for (int i = 0; i < n; ++i) {
    const auto& views = idx.records_of_object[eligible[pick_obj(rng)]];
    std::uniform_int_distribution<std::size_t> first(0, views.size() - 1);
    std::uniform_int_distribution<std::size_t> second(0, views.size() - 2);
    const std::size_t a = first(rng);
    std::size_t p = second(rng);
    if (p >= a) ++p;
    pairs.push_back({views[a], views[p]});
  }
  return pairs;
}

inline std::vector<PositivePair> sample_positive_pairs(const MultiViewDataset& d, int n,
                                                       std::uint64_t seed) {
  return sample_positive_pairs(DatasetIndex(d), n, seed);
}

namespace detail {

/// `embed(i)` returns the current embedding of record i.
template <typename EmbedFn>
std::vector<std::size_t> mine_negatives_with(EmbedFn&& embed, const PositivePair& pair,
                                             const std::vector<std::size_t>& candidates,
                                             double margin, int k_hard, int k_rand,
                                             std::uint64_t seed) {
  if (candidates.empty()) throw NoValidNegatives("no candidate negatives for pair");
  const FeatureVector& fa = embed(pair.anchor);
  const double d_pos = cosine_distance(fa, embed(pair.positive));

  struct Scored {
    double hinge_arg;
    std::size_t record;
  };
  std::vector<Scored> scored;
  scored.reserve(candidates.size());
  for (std::size_t c : candidates) {
    scored.push_back({d_pos - cosine_distance(fa, embed(c)) + margin, c});
  }
  // Highest loss first; the unclamped hinge argument refines the ranking among
  // inactive candidates without changing the order of active ones.
  std::sort(scored.begin(), scored.end(), [](const Scored& x, const Scored& y) {
    if (x.hinge_arg != y.hinge_arg) return x.hinge_arg > y.hinge_arg;
    return x.record < y.record;
  });

  const std::size_t n_hard = std::min<std::size_t>(std::max(k_hard, 0), scored.size());
  std::vector<std::size_t> out;
  out.reserve(n_hard + std::max(k_rand, 0));
  for (std::size_t i = 0; i < n_hard; ++i) out.push_back(scored[i].record);

  if (k_rand > 0) {
    Rng rng(seed);
    std::vector<std::size_t> rest;
    for (std::size_t i = n_hard; i < scored.size(); ++i) rest.push_back(scored[i].record);
    std::sort(rest.begin(), rest.end());
    if (rest.size() >= static_cast<std::size_t>(k_rand)) {
      // partial Fisher-Yates: first k_rand slots become the sample
      for (int i = 0; i < k_rand; ++i) {
        std::uniform_int_distribution<std::size_t> u(i, rest.size() - 1);
        std::swap(rest[i], rest[u(rng)]);
        out.push_back(rest[i]);
      }
    } else {
      std::vector<std::size_t> all = candidates;
      std::sort(all.begin(), all.end());
      std::uniform_int_distribution<std::size_t> u(0, all.size() - 1);
      for (int i = 0; i < k_rand; ++i) out.push_back(all[u(rng)]);
    }
  }
  return out;
}

}  // namespace detail

/// k_hard highest-loss candidates (ties to the lower record index) followed by
/// k_rand uniform draws from the remaining candidates.
inline std::vector<std::size_t> mine_negatives(const EmbeddingNet& net, const PositivePair& pair,
                                               const std::vector<std::size_t>& candidates,
                                               const MultiViewDataset& d, double margin,
                                               int k_hard, int k_rand, std::uint64_t seed) {
  std::map<std::size_t, FeatureVector> cache;
  auto embed = [&](std::size_t i) -> const FeatureVector& {
    auto it = cache.find(i);
    if (it == cache.end()) it = cache.emplace(i, forward(net, d.records.at(i).features)).first;
    return it->second;
  };
  return detail::mine_negatives_with(embed, pair, candidates, margin, k_hard, k_rand, seed);
}

/// Positive pairs, a per-batch record pool drawn from each anchor's category
/// (other objects only), and negatives mined from that pool with the current net.
inline TripletBatch build_batch(const EmbeddingNet& net, const MultiViewDataset& d,
                                const DatasetIndex& idx, const TrainConfig& cfg,
                                std::uint64_t seed) {
  const auto pairs = sample_positive_pairs(idx, cfg.batch_positive_pairs, derive_seed(seed, {0}));

  Rng pool_rng(derive_seed(seed, {1}));
  std::set<std::size_t> pool;
  for (const PositivePair& p : pairs) {
    const int obj = idx.object_of_record[p.anchor];
    const int cat = idx.category_of_record[p.anchor];
    std::vector<std::size_t> others;
    for (std::size_t r : idx.records_of_category[cat]) {
      if (idx.object_of_record[r] != obj) others.push_back(r);
    }
    if (others.empty()) {
      throw InsufficientObjects("category " + idx.category_ids[cat] + " has a single object");
    }
    const std::size_t take = std::min<std::size_t>(kPoolRecordsPerPair, others.size());
    for (std::size_t i = 0; i < take; ++i) {
      std::uniform_int_distribution<std::size_t> u(i, others.size() - 1);
      std::swap(others[i], others[u(pool_rng)]);
      pool.insert(others[i]);
    }
  }

  std::map<std::size_t, FeatureVector> cache;
  auto embed = [&](std::size_t i) -> const FeatureVector& {
    auto it = cache.find(i);
    if (it == cache.end()) it = cache.emplace(i, forward(net, d.records[i].features)).first;
    return it->second;
  };

  TripletBatch batch;
  batch.triplets.reserve(pairs.size() *
                         (cfg.hard_negatives_per_pair + cfg.random_negatives_per_pair));
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const PositivePair& p = pairs[k];
    const int obj = idx.object_of_record[p.anchor];
    const int cat = idx.category_of_record[p.anchor];
    std::vector<std::size_t> candidates;
    for (std::size_t r : pool) {
      if (idx.category_of_record[r] == cat && idx.object_of_record[r] != obj) candidates.push_back(r);
    }
    const auto negs = detail::mine_negatives_with(
        embed, p, candidates, cfg.margin, cfg.hard_negatives_per_pair,
        cfg.random_negatives_per_pair, derive_seed(seed, {2, static_cast<std::uint64_t>(k)}));
    for (std::size_t n : negs) batch.triplets.push_back({p.anchor, p.positive, n});
  }
  return batch;
}

inline TripletBatch build_batch(const EmbeddingNet& net, const MultiViewDataset& d,
                                const TrainConfig& cfg, std::uint64_t seed) {
  return build_batch(net, d, DatasetIndex(d), cfg, seed);
}

}  // namespace persistnet
