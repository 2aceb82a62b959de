#pragma once

// Instance and categorical retrieval over cosine similarity, with
// non-interpolated average precision for MAP and interpolated precision for
// precision-recall curves.

#include <algorithm>
#include <cstdio>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "persistnet/dataset.hpp"
#include "persistnet/errors.hpp"
#include "persistnet/geometry.hpp"

namespace persistnet {

/// 1 - cosine_distance, in [-1, 1].
inline double similarity_score(const FeatureVector& a, const FeatureVector& b) {
  return 1.0 - cosine_distance(a, b);
}

struct RankedItem {
  std::size_t record = 0;
  double score = 0.0;
  bool relevant = false;

  friend bool operator==(const RankedItem&, const RankedItem&) = default;
};

/// Candidates by descending score, ties by ascending record index.
using RankedList = std::vector<RankedItem>;

inline void sort_ranked(RankedList& list) {
  std::sort(list.begin(), list.end(), [](const RankedItem& x, const RankedItem& y) {
    if (x.score != y.score) return x.score > y.score;
    return x.record < y.record;
  });
}

inline std::vector<bool> relevance_of(const RankedList& list) {
  std::vector<bool> rel;
  rel.reserve(list.size());
  for (const auto& it : list) rel.push_back(it.relevant);
  return rel;
}

/// Mean over relevant positions k of (relevant items in the top k) / k.
inline double average_precision(const std::vector<bool>& relevance) {
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t k = 0; k < relevance.size(); ++k) {
    if (relevance[k]) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(k + 1);
    }
  }
  if (hits == 0) throw NoRelevant("average_precision: ranked list has no relevant item");
  return sum / static_cast<double>(hits);
}

/// n evenly spaced recall levels 1/n, 2/n, ..., 1.
inline std::vector<double> default_recall_grid(int n = 100) {
  std::vector<double> g;
  g.reserve(static_cast<std::size_t>(std::max(n, 0)));
  for (int i = 1; i <= n; ++i) g.push_back(static_cast<double>(i) / n);
  return g;
}

using PrPoint = std::pair<double, double>;  // (recall, precision)

/// Interpolated precision per query (best precision at any rank reaching the
/// recall level), averaged over queries at each grid point.
inline std::vector<PrPoint> pr_curve(const std::vector<std::vector<bool>>& queries,
                                     const std::vector<double>& recall_grid) {
  for (std::size_t i = 0; i < recall_grid.size(); ++i) {
    if (!(recall_grid[i] > 0.0 && recall_grid[i] <= 1.0) ||
        (i > 0 && !(recall_grid[i] > recall_grid[i - 1]))) {
      throw ConfigError("recall grid must be strictly increasing within (0, 1]");
    }
  }
  std::vector<double> acc(recall_grid.size(), 0.0);
  for (const auto& rel : queries) {
    const auto total = static_cast<std::size_t>(std::count(rel.begin(), rel.end(), true));
    if (total == 0) throw NoRelevant("pr_curve: query has no relevant item");
    std::vector<double> recall(rel.size());
    std::vector<double> best(rel.size());
    std::size_t hits = 0;
    for (std::size_t k = 0; k < rel.size(); ++k) {
      if (rel[k]) ++hits;
      recall[k] = static_cast<double>(hits) / static_cast<double>(total);
      best[k] = static_cast<double>(hits) / static_cast<double>(k + 1);
    }
    for (std::size_t k = rel.size() - 1; k-- > 0;) best[k] = std::max(best[k], best[k + 1]);
    std::size_t k = 0;
    for (std::size_t g = 0; g < recall_grid.size(); ++g) {
      while (recall[k] < recall_grid[g]) ++k;  // recall reaches 1 at the last hit
      acc[g] += best[k];
    }
  }
  std::vector<PrPoint> out;
  out.reserve(recall_grid.size());
  for (std::size_t g = 0; g < recall_grid.size(); ++g) {
    out.emplace_back(recall_grid[g],
                     queries.empty() ? 0.0 : acc[g] / static_cast<double>(queries.size()));
  }
  return out;
}

struct QueryAp {
  std::size_t query = 0;
  double ap = 0.0;
};

struct RetrievalReport {
  std::string task;
  std::vector<QueryAp> per_query_ap;  // ascending query index
  std::size_t excluded_queries = 0;   // queries with no relevant candidate
  double map_score = 0.0;
  std::vector<PrPoint> pr_points;
};

namespace detail {

/// Cosine similarities with norms computed once; identical in value to
/// similarity_score on the same pair.
class CosineScorer {
 public:
  explicit CosineScorer(const std::vector<FeatureVector>& f) : f_(f) {
    norms_.reserve(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) {
      if (i > 0 && f[i].size() != f[0].size()) {
        throw DimMismatch(f[0].size(), f[i].size(), "feature " + std::to_string(i));
      }
      const double n = f[i].norm();
      if (!(n >= kZeroNormEpsilon)) {
        throw ZeroNormInput("feature " + std::to_string(i) + " has zero norm");
      }
      norms_.push_back(n);
    }
  }

  double operator()(std::size_t i, std::size_t j) const {
    const double cos = std::clamp(f_[i].dot(f_[j]) / (norms_[i] * norms_[j]), -1.0, 1.0);
    return 1.0 - (1.0 - cos);
  }

 private:
  const std::vector<FeatureVector>& f_;
  std::vector<double> norms_;
};

template <typename CandidateFn, typename RelevantFn>
RetrievalReport run_retrieval(const std::vector<FeatureVector>& features, const MultiViewDataset& d,
                              std::string task, CandidateFn&& candidates_of,
                              RelevantFn&& relevant, const std::vector<double>& recall_grid) {
  if (features.size() != d.size()) {
    throw DimMismatch(d.size(), features.size(), "feature map vs dataset records");
  }
  const CosineScorer score(features);
  RetrievalReport rep;
  rep.task = std::move(task);
  std::vector<std::vector<bool>> lists;
  RankedList list;
  for (std::size_t q = 0; q < d.size(); ++q) {
    list.clear();
    for (std::size_t c : candidates_of(q)) {
      if (c == q) continue;
      list.push_back({c, score(q, c), relevant(q, c)});
    }
    sort_ranked(list);
    auto rel = relevance_of(list);
    if (std::find(rel.begin(), rel.end(), true) == rel.end()) {
      ++rep.excluded_queries;
      continue;
    }
    rep.per_query_ap.push_back({q, average_precision(rel)});
    lists.push_back(std::move(rel));
  }
  if (rep.per_query_ap.empty()) {
    throw NoRelevant(rep.task + " retrieval: no query has a relevant candidate");
  }
  double sum = 0.0;
  for (const auto& qa : rep.per_query_ap) sum += qa.ap;
  rep.map_score = sum / static_cast<double>(rep.per_query_ap.size());
  rep.pr_points = pr_curve(lists, recall_grid);
  return rep;
}

}  // namespace detail

/// Ranked list of `candidates` for one query under cosine similarity.
inline RankedList rank_candidates(const std::vector<FeatureVector>& features, std::size_t query,
                                  const std::vector<std::size_t>& candidates,
                                  const std::vector<bool>& relevant) {
  RankedList list;
  list.reserve(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    list.push_back({candidates[i], similarity_score(features[query], features[candidates[i]]),
                    relevant[i]});
  }
  sort_ranked(list);
  return list;
}

/// Every record queries the other records of its category; relevant = other
/// views of the same object.
inline RetrievalReport instance_retrieval(const std::vector<FeatureVector>& features,
                                          const MultiViewDataset& d,
                                          const std::vector<double>& recall_grid = default_recall_grid()) {
  const DatasetIndex idx(d);
  return detail::run_retrieval(
      features, d, "instance",
      [&](std::size_t q) -> const std::vector<std::size_t>& {
        return idx.records_of_category[idx.category_of_record[q]];
      },
      [&](std::size_t q, std::size_t c) { return idx.object_of_record[q] == idx.object_of_record[c]; },
      recall_grid);
}

/// Every record queries all other records; relevant = same category.
inline RetrievalReport categorical_retrieval(const std::vector<FeatureVector>& features,
                                             const MultiViewDataset& d,
                                             const std::vector<double>& recall_grid = default_recall_grid()) {
  const DatasetIndex idx(d);
  if (idx.num_categories() < 2) {
    throw InsufficientCategories("categorical retrieval needs at least 2 categories, dataset has " +
                                 std::to_string(idx.num_categories()));
  }
  std::vector<std::size_t> all(d.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return detail::run_retrieval(
      features, d, "categorical",
      [&](std::size_t) -> const std::vector<std::size_t>& { return all; },
      [&](std::size_t q, std::size_t c) {
        return idx.category_of_record[q] == idx.category_of_record[c];
      },
      recall_grid);
}

// ---------------------------------------------------------------------------
// export

inline nlohmann::ordered_json report_to_json(const RetrievalReport& r, const MultiViewDataset& d) {
  nlohmann::ordered_json j;
  j["task"] = r.task;
  j["map"] = r.map_score;
  j["queries"] = r.per_query_ap.size();
  j["excluded_queries"] = r.excluded_queries;
  auto per = nlohmann::ordered_json::array();
  for (const auto& qa : r.per_query_ap) {
    nlohmann::ordered_json e;
    e["query"] = qa.query;
    if (qa.query < d.size()) {
      e["object_id"] = d.records[qa.query].object_id;
      e["view_index"] = d.records[qa.query].view_index;
    }
    e["ap"] = qa.ap;
    per.push_back(std::move(e));
  }
  j["per_query_ap"] = std::move(per);
  auto pr = nlohmann::ordered_json::array();
  for (const auto& [rec, prec] : r.pr_points) pr.push_back({rec, prec});
  j["pr_points"] = std::move(pr);
  return j;
}

inline void write_pr_csv(const std::vector<PrPoint>& pts, std::ostream& os) {
  os << "recall,precision\n";
  char buf[96];
  for (const auto& [r, p] : pts) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", r, p);
    os << buf;
  }
}

}  // namespace persistnet
