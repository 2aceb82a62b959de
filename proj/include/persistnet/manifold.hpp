#pragma once

// View-manifold measurements: pairwise cosine matrices, single-linkage
// ("nearest point") dendrograms, cophenetic distances, Spearman correlation
// between trees, and the inter/intra-object compactness score.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "persistnet/dataset.hpp"
#include "persistnet/errors.hpp"
#include "persistnet/geometry.hpp"

namespace persistnet {

inline constexpr const char* kTreeFormatVersion = "persistnet-tree-v1";

/// Dense n x n matrix, row-major.
struct SquareMatrix {
  std::size_t n = 0;
  std::vector<double> entries;

  SquareMatrix() = default;
  explicit SquareMatrix(std::size_t size) : n(size), entries(size * size, 0.0) {}

  double& operator()(std::size_t i, std::size_t j) { return entries[i * n + j]; }
  double operator()(std::size_t i, std::size_t j) const { return entries[i * n + j]; }

  /// Entries (i, j) with i < j in row-major order.
  std::vector<double> upper_triangle() const {
    std::vector<double> v;
    v.reserve(n * (n - 1) / 2);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) v.push_back((*this)(i, j));
    return v;
  }

  friend bool operator==(const SquareMatrix&, const SquareMatrix&) = default;
};

using DistanceMatrix = SquareMatrix;
using CopheneticMatrix = SquareMatrix;

inline DistanceMatrix pairwise_matrix(const std::vector<FeatureVector>& features) {
  const std::size_t n = features.size();
  std::vector<double> norms(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (features[i].size() != features[0].size()) {
      throw DimMismatch(features[0].size(), features[i].size(), "feature " + std::to_string(i));
    }
    norms[i] = features[i].norm();
    if (!(norms[i] >= kZeroNormEpsilon)) {
      throw ZeroNormInput("feature " + std::to_string(i) + " has zero norm");
    }
  }
  DistanceMatrix m(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double cos = std::clamp(features[i].dot(features[j]) / (norms[i] * norms[j]), -1.0, 1.0);
      m(i, j) = m(j, i) = 1.0 - cos;
    }
  }
  return m;
}

// ---------------------------------------------------------------------------
// Dendrograms

struct Merge {
  std::size_t left = 0;   // smaller cluster id
  std::size_t right = 0;  // larger cluster id
  double height = 0.0;
  std::size_t size = 0;

  friend bool operator==(const Merge&, const Merge&) = default;
};

/// Leaves are 0..n-1; merge k creates cluster n + k.
struct Dendrogram {
  std::size_t n_leaves = 0;
  std::vector<Merge> merges;

  friend bool operator==(const Dendrogram&, const Dendrogram&) = default;
};

/// Throws FormatError when ids, sizes, or the merge count are inconsistent.
inline void validate(const Dendrogram& d) {
  const std::size_t n = d.n_leaves;
  if (n < 2 || d.merges.size() != n - 1) {
    throw FormatError(0, "dendrogram over " + std::to_string(n) + " leaves needs " +
                             std::to_string(n > 0 ? n - 1 : 0) + " merges");
  }
  std::vector<std::size_t> size_of(2 * n - 1, 0);
  std::vector<bool> used(2 * n - 1, false);
  for (std::size_t i = 0; i < n; ++i) size_of[i] = 1;
  for (std::size_t k = 0; k < d.merges.size(); ++k) {
    const Merge& m = d.merges[k];
    const std::size_t id = n + k;
    if (m.left >= id || m.right >= id || m.left == m.right || used[m.left] || used[m.right]) {
      throw FormatError(k + 2, "merge " + std::to_string(k) + " references an invalid cluster");
    }
    if (m.size != size_of[m.left] + size_of[m.right]) {
      throw FormatError(k + 2, "merge " + std::to_string(k) + " size mismatch");
    }
    if (!std::isfinite(m.height)) throw FormatError(k + 2, "non-finite merge height");
    used[m.left] = used[m.right] = true;
    size_of[id] = m.size;
  }
}

/// Single-linkage agglomeration. Each step merges the pair of clusters with the
/// smallest minimum leaf-to-leaf distance; ties go to the lexicographically
/// smallest (smaller id, larger id).
inline Dendrogram hac_nearest_point(const DistanceMatrix& m) {
  const std::size_t n = m.n;
  if (n < 2) throw DegenerateInput("hac_nearest_point needs at least 2 items");
  for (double v : m.entries) {
    if (!std::isfinite(v)) throw NonFiniteValue("distance matrix has non-finite entries");
  }
  std::vector<double> dist = m.entries;  // slot x slot, single-link distances
  std::vector<std::size_t> id(n);
  std::vector<std::size_t> size(n, 1);
  std::vector<std::size_t> alive(n);
  std::iota(id.begin(), id.end(), 0);
  std::iota(alive.begin(), alive.end(), 0);

  Dendrogram out;
  out.n_leaves = n;
  out.merges.reserve(n - 1);
  for (std::size_t step = 0; step + 1 < n; ++step) {
    std::size_t best_a = 0, best_b = 0;
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_lo = 0, best_hi = 0;
    bool found = false;
    for (std::size_t ia = 0; ia < alive.size(); ++ia) {
      const std::size_t a = alive[ia];
      const double* row = &dist[a * n];
      for (std::size_t ib = ia + 1; ib < alive.size(); ++ib) {
        const std::size_t b = alive[ib];
        const double v = row[b];
        if (found && v > best) continue;
        const std::size_t lo = std::min(id[a], id[b]);
        const std::size_t hi = std::max(id[a], id[b]);
        if (!found || v < best || lo < best_lo || (lo == best_lo && hi < best_hi)) {
          best = v;
          best_a = a;
          best_b = b;
          best_lo = lo;
          best_hi = hi;
          found = true;
        }
      }
    }
    out.merges.push_back({best_lo, best_hi, best, size[best_a] + size[best_b]});
    for (std::size_t x : alive) {
      const double v = std::min(dist[best_a * n + x], dist[best_b * n + x]);
      dist[best_a * n + x] = v;
      dist[x * n + best_a] = v;
    }
    id[best_a] = n + step;
    size[best_a] += size[best_b];
    alive.erase(std::find(alive.begin(), alive.end(), best_b));
  }
  return out;
}

/// t(i, j) = height of the merge that first joins i and j.
inline CopheneticMatrix cophenetic(const Dendrogram& d) {
  validate(d);
  const std::size_t n = d.n_leaves;
  std::vector<std::vector<std::size_t>> members(2 * n - 1);
  for (std::size_t i = 0; i < n; ++i) members[i] = {i};
  CopheneticMatrix t(n);
  for (std::size_t k = 0; k < d.merges.size(); ++k) {
    const Merge& m = d.merges[k];
    for (std::size_t i : members[m.left])
      for (std::size_t j : members[m.right]) t(i, j) = t(j, i) = m.height;
    auto& dst = members[n + k];
    dst = std::move(members[m.left]);
    dst.insert(dst.end(), members[m.right].begin(), members[m.right].end());
    members[m.right].clear();
  }
  return t;
}

// ---------------------------------------------------------------------------
// Rank correlation

/// 1-based ranks; tied values share the mean of their positions.
inline std::vector<double> average_ranks(const std::vector<double>& x) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> r(x.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[order[k]] = rank;
    i = j + 1;
  }
  return r;
}

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const auto n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw DegenerateInput("pearson: constant input");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

/// Pearson correlation of average ranks.
inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw DimMismatch(x.size(), y.size(), "spearman inputs");
  if (x.size() < 2) throw DegenerateInput("spearman needs at least 2 observations");
  auto is_constant = [](const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [&](double a) { return a == v.front(); });
  };
  if (is_constant(x) || is_constant(y)) throw DegenerateInput("spearman: constant input");
  for (double v : x) if (std::isnan(v)) throw NonFiniteValue("spearman: NaN input");
  for (double v : y) if (std::isnan(v)) throw NonFiniteValue("spearman: NaN input");
  return pearson(average_ranks(x), average_ranks(y));
}

struct TreeCorrelation {
  double rho = 0.0;
  std::size_t n = 0;
  std::size_t pairs = 0;
};

/// Spearman correlation between the cophenetic distances of the features'
/// single-linkage tree and those of `reference`, over all leaf pairs.
inline TreeCorrelation tree_correlation(const std::vector<FeatureVector>& features,
                                        const Dendrogram& reference) {
  if (features.size() != reference.n_leaves) {
    throw DimMismatch(reference.n_leaves, features.size(), "features vs reference tree leaves");
  }
  const auto own = cophenetic(hac_nearest_point(pairwise_matrix(features)));
  const auto ref = cophenetic(reference);
  const auto a = own.upper_triangle();
  return {spearman(a, ref.upper_triangle()), features.size(), a.size()};
}

// ---------------------------------------------------------------------------
// Compactness score

struct LdaOptions {
  bool normalize = true;     // L2-normalize features first
  bool global_mean = false;  // x-bar over the whole dataset instead of the category
};

struct CategoryScore {
  std::string category_id;
  double sigma_inter = 0.0;
  double sigma_intra = 0.0;
  double score = 0.0;
  bool degenerate = false;  // sigma_intra == 0; excluded from the mean
};

struct LdaScoreReport {
  std::vector<CategoryScore> per_category;
  double mean_score = 0.0;
  std::size_t degenerate_categories = 0;
  LdaOptions options;
};

/// Per category: inter-object spread of object means around x-bar over the
/// mean intra-object spread of views around their object mean.
inline LdaScoreReport lda_score(const std::vector<FeatureVector>& features, const MultiViewDataset& d,
                                const LdaOptions& opt = {}) {
  if (features.size() != d.size()) {
    throw DimMismatch(d.size(), features.size(), "feature map vs dataset records");
  }
  if (features.empty()) throw DegenerateInput("lda_score on an empty dataset");
  const DatasetIndex idx(d);
  std::vector<FeatureVector> x;
  x.reserve(features.size());
  for (std::size_t i = 0; i < features.size(); ++i) {
    if (features[i].size() != features[0].size()) {
      throw DimMismatch(features[0].size(), features[i].size(), "feature " + std::to_string(i));
    }
    if (opt.normalize) {
      const double n = features[i].norm();
      if (!(n >= kZeroNormEpsilon)) throw ZeroNormInput("feature " + std::to_string(i) + " has zero norm");
      x.push_back(features[i] / n);
    } else {
      x.push_back(features[i]);
    }
  }
  auto mean_of = [&](const std::vector<std::size_t>& recs) {
    FeatureVector m = FeatureVector::Zero(x[0].size());
    for (std::size_t r : recs) m += x[r];
    return FeatureVector(m / static_cast<double>(recs.size()));
  };
  std::vector<std::size_t> everything(x.size());
  std::iota(everything.begin(), everything.end(), 0);
  const FeatureVector global = mean_of(everything);

  LdaScoreReport rep;
  rep.options = opt;
  double sum = 0.0;
  std::size_t scored = 0;
  for (std::size_t c = 0; c < idx.num_categories(); ++c) {
    const auto& objs = idx.objects_of_category[c];
    if (objs.size() < 2) {
      throw InsufficientObjects("category " + idx.category_ids[c] + " has fewer than 2 objects");
    }
    const FeatureVector center = opt.global_mean ? global : mean_of(idx.records_of_category[c]);
    double inter = 0.0, intra = 0.0, scale = 0.0;
    for (int o : objs) {
      const auto& recs = idx.records_of_object[o];
      const FeatureVector mu = mean_of(recs);
      inter += (mu - center).squaredNorm();
      double spread = 0.0;
      for (std::size_t r : recs) {
        spread += (x[r] - mu).squaredNorm();
        scale += x[r].squaredNorm();
      }
      intra += spread / static_cast<double>(recs.size());
    }
    const auto s = static_cast<double>(objs.size());
    CategoryScore cs{idx.category_ids[c], inter / s, intra / s, 0.0, false};
    scale /= static_cast<double>(idx.records_of_category[c].size());
    // Exactly identical views leave only rounding residue in the mean.
    if (!(cs.sigma_intra > 1e-24 * std::max(scale, 1e-300))) {
      cs.degenerate = true;
      ++rep.degenerate_categories;
    } else {
      cs.score = cs.sigma_inter / cs.sigma_intra;
      sum += cs.score;
      ++scored;
    }
    rep.per_category.push_back(std::move(cs));
  }
  if (scored == 0) {
    throw DegenerateIntra("intra-object spread is zero in every category (" +
                          std::to_string(rep.degenerate_categories) + " categories)");
  }
  rep.mean_score = sum / static_cast<double>(scored);
  return rep;
}

// ---------------------------------------------------------------------------
// export / import

inline void write_matrix_csv(const SquareMatrix& m, std::ostream& os) {
  os << m.n << '\n';
  char buf[40];
  for (std::size_t i = 0; i < m.n; ++i) {
    for (std::size_t j = 0; j < m.n; ++j) {
      if (j) os << ',';
      std::snprintf(buf, sizeof buf, "%.17g", m(i, j));
      os << buf;
    }
    os << '\n';
  }
}

inline void write_dendrogram(const Dendrogram& d, std::ostream& os) {
  os << kTreeFormatVersion << '\n';
  char buf[128];
  for (std::size_t k = 0; k < d.merges.size(); ++k) {
    const Merge& m = d.merges[k];
    std::snprintf(buf, sizeof buf, "%zu,%zu,%zu,%.17g,%zu\n", k, m.left, m.right, m.height, m.size);
    os << buf;
  }
}

inline void save_dendrogram(const Dendrogram& d, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path);
  write_dendrogram(d, os);
  if (!os) throw IoError("write failed: " + path);
}

inline Dendrogram read_dendrogram(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw FormatError(1, "missing persistnet-tree-v1 header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kTreeFormatVersion) throw FormatError(1, "expected header " + std::string(kTreeFormatVersion));
  Dendrogram d;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::string_view sv(line);
    std::string_view f[5];
    for (int i = 0; i < 5; ++i) {
      const auto comma = sv.find(',');
      if ((comma == std::string_view::npos) != (i == 4)) {
        throw FormatError(lineno, "expected merge_index,left_id,right_id,height,size");
      }
      f[i] = sv.substr(0, comma);
      if (i < 4) sv.remove_prefix(comma + 1);
    }
    auto parse_size = [&](std::string_view s) {
      std::size_t v = 0;
      auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec != std::errc() || p != s.data() + s.size()) throw FormatError(lineno, "bad integer field");
      return v;
    };
    Merge m;
    if (parse_size(f[0]) != d.merges.size()) throw FormatError(lineno, "merge_index out of sequence");
    m.left = parse_size(f[1]);
    m.right = parse_size(f[2]);
    {
      auto [p, ec] = std::from_chars(f[3].data(), f[3].data() + f[3].size(), m.height);
      if (ec != std::errc() || p != f[3].data() + f[3].size()) throw FormatError(lineno, "bad height");
    }
    m.size = parse_size(f[4]);
    d.merges.push_back(m);
  }
  d.n_leaves = d.merges.size() + 1;
  validate(d);
  return d;
}

inline Dendrogram load_dendrogram(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open for reading: " + path);
  return read_dendrogram(is);
}

inline nlohmann::ordered_json lda_to_json(const LdaScoreReport& r) {
  nlohmann::ordered_json j;
  j["mean_score"] = r.mean_score;
  j["normalized"] = r.options.normalize;
  j["center"] = r.options.global_mean ? "global" : "category";
  j["degenerate_categories"] = r.degenerate_categories;
  auto per = nlohmann::ordered_json::array();
  for (const auto& c : r.per_category) {
    nlohmann::ordered_json e;
    e["category_id"] = c.category_id;
    e["sigma_inter"] = c.sigma_inter;
    e["sigma_intra"] = c.sigma_intra;
    if (c.degenerate) {
      e["degenerate"] = true;
    } else {
      e["score"] = c.score;
    }
    per.push_back(std::move(e));
  }
  j["per_category"] = std::move(per);
  return j;
}

}  // namespace persistnet
