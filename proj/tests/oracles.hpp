#pragma once

// Independent reference implementations used to check the library. Each one is
// written in the most direct form available and shares no code with it.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <vector>

#include "persistnet/dataset.hpp"
#include "persistnet/manifold.hpp"
#include "persistnet/net.hpp"

namespace oracle {

using Vec = std::vector<double>;

inline Vec to_vec(const persistnet::FeatureVector& v) { return Vec(v.data(), v.data() + v.size()); }

inline double dot(const Vec& a, const Vec& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double cosine_distance(const Vec& a, const Vec& b) {
  return 1.0 - dot(a, b) / (std::sqrt(dot(a, a)) * std::sqrt(dot(b, b)));
}

/// Central differences of a scalar function of a vector.
inline Vec central_diff(const std::function<double(const Vec&)>& f, Vec x, double step) {
  Vec g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + step;
    const double fp = f(x);
    x[i] = saved - step;
    const double fm = f(x);
    x[i] = saved;
    g[i] = (fp - fm) / (2 * step);
  }
  return g;
}

inline double max_rel_err(const Vec& a, const Vec& b, double floor = 1e-8) {
  double worst = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double den = std::max({std::abs(a[i]), std::abs(b[i]), floor});
    worst = std::max(worst, std::abs(a[i] - b[i]) / den);
  }
  return worst;
}

/// Layer-by-layer evaluation with explicit loops.
inline Vec naive_forward(const persistnet::EmbeddingNet& net, Vec x) {
  for (const auto& l : net.layers) {
    Vec y(l.weight.rows());
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
      double s = l.bias[r];
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) s += l.weight(r, c) * x[c];
      y[r] = (l.activation == persistnet::Activation::rectifier && s < 0) ? 0.0 : s;
    }
    x = std::move(y);
  }
  return x;
}

// ---------------------------------------------------------------------------
// Ranking metrics

struct Fraction {
  std::int64_t num = 0;
  std::int64_t den = 1;

  Fraction operator+(const Fraction& o) const {
    Fraction r{num * o.den + o.num * den, den * o.den};
    const auto g = std::gcd(r.num, r.den);
    return {r.num / g, r.den / g};
  }
  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
};

/// AP in exact rational arithmetic: (1/R) * sum over relevant ranks i of
/// (#relevant at ranks <= i) / i, with every prefix recounted from scratch.
inline Fraction exact_average_precision(const std::vector<bool>& rel) {
  Fraction sum{0, 1};
  std::int64_t total = 0;
  for (std::size_t i = 0; i < rel.size(); ++i) {
    if (!rel[i]) continue;
    ++total;
    std::int64_t hits = 0;
    for (std::size_t j = 0; j <= i; ++j) hits += rel[j] ? 1 : 0;
    sum = sum + Fraction{hits, static_cast<std::int64_t>(i + 1)};
  }
  const std::int64_t g = std::gcd(sum.num, sum.den * total);
  return {sum.num / g, sum.den * total / g};
}

/// Interpolated precision at recall level r: best precision over all cutoffs
/// whose recall reaches r.
inline double interpolated_precision(const std::vector<bool>& rel, double r) {
  const double total = static_cast<double>(std::count(rel.begin(), rel.end(), true));
  double best = 0;
  for (std::size_t k = 1; k <= rel.size(); ++k) {
    const double hits = static_cast<double>(std::count(rel.begin(), rel.begin() + k, true));
    if (hits / total >= r - 1e-12) best = std::max(best, hits / k);
  }
  return best;
}

// ---------------------------------------------------------------------------
// Rank statistics

/// Ranks by counting: rank = #smaller + (#equal + 1) / 2.
inline Vec counted_ranks(const Vec& x) {
  Vec r(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    double less = 0, equal = 0;
    for (double v : x) {
      if (v < x[i]) ++less;
      if (v == x[i]) ++equal;
    }
    r[i] = less + (equal + 1) / 2;
  }
  return r;
}

inline double pearson(const Vec& x, const Vec& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

inline double naive_spearman(const Vec& x, const Vec& y) { return pearson(counted_ranks(x), counted_ranks(y)); }

// ---------------------------------------------------------------------------
// Clustering

/// Minimax path distance by exhaustive search over simple paths.
inline std::vector<Vec> minimax_paths(const persistnet::DistanceMatrix& m) {
  const std::size_t n = m.n;
  std::vector<Vec> best(n, Vec(n, std::numeric_limits<double>::infinity()));
  std::vector<bool> on_path(n, false);
  std::function<void(std::size_t, std::size_t, double)> walk = [&](std::size_t start, std::size_t at,
                                                                   double worst) {
    if (at != start) best[start][at] = std::min(best[start][at], worst);
    on_path[at] = true;
    for (std::size_t next = 0; next < n; ++next) {
      if (on_path[next]) continue;
      walk(start, next, std::max(worst, m(at, next)));
    }
    on_path[at] = false;
  };
  for (std::size_t s = 0; s < n; ++s) {
    best[s][s] = 0;
    walk(s, s, 0.0);
  }
  return best;
}

/// Single linkage recomputed from leaf sets at every step. Candidate pairs are
/// visited in (smaller id, larger id) order and only a strictly smaller
/// distance replaces the incumbent.
inline persistnet::Dendrogram naive_single_linkage(const persistnet::DistanceMatrix& m) {
  const std::size_t n = m.n;
  std::map<std::size_t, std::vector<std::size_t>> clusters;
  for (std::size_t i = 0; i < n; ++i) clusters[i] = {i};
  persistnet::Dendrogram d;
  d.n_leaves = n;
  for (std::size_t step = 0; step + 1 < n; ++step) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t lo = 0, hi = 0;
    for (auto a = clusters.begin(); a != clusters.end(); ++a)
      for (auto b = std::next(a); b != clusters.end(); ++b) {
        double link = std::numeric_limits<double>::infinity();
        for (auto i : a->second)
          for (auto j : b->second) link = std::min(link, m(i, j));
        if (link < best) {
          best = link;
          lo = a->first;
          hi = b->first;
        }
      }
    auto merged = clusters[lo];
    merged.insert(merged.end(), clusters[hi].begin(), clusters[hi].end());
    d.merges.push_back({lo, hi, best, merged.size()});
    clusters.erase(lo);
    clusters.erase(hi);
    clusters[n + step] = std::move(merged);
  }
  return d;
}

/// Cophenetic distance by locating, for each pair, the first merge whose
/// member set contains both leaves.
inline std::vector<Vec> lca_cophenetic(const persistnet::Dendrogram& d) {
  const std::size_t n = d.n_leaves;
  std::vector<std::set<std::size_t>> members(n + d.merges.size());
  for (std::size_t i = 0; i < n; ++i) members[i] = {i};
  for (std::size_t k = 0; k < d.merges.size(); ++k) {
    members[n + k] = members[d.merges[k].left];
    members[n + k].insert(members[d.merges[k].right].begin(), members[d.merges[k].right].end());
  }
  std::vector<Vec> t(n, Vec(n, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      for (std::size_t k = 0; k < d.merges.size(); ++k) {
        if (members[n + k].count(i) && members[n + k].count(j)) {
          t[i][j] = d.merges[k].height;
          break;
        }
      }
    }
  return t;
}

// ---------------------------------------------------------------------------
// LDA compactness score

struct LdaCategory {
  double inter = 0, intra = 0;
};

/// Score_i transcribed directly over grouped vectors: groups[c] lists the views
/// of object c in one category.
inline LdaCategory lda_formula(const std::vector<std::vector<Vec>>& groups, bool normalize,
                               const Vec* global_center = nullptr) {
  auto prep = [&](Vec v) {
    if (normalize) {
      const double n = std::sqrt(dot(v, v));
      for (double& x : v) x /= n;
    }
    return v;
  };
  const std::size_t dim = groups[0][0].size();
  Vec center(dim, 0.0);
  double count = 0;
  std::vector<Vec> means;
  for (const auto& obj : groups) {
    Vec mu(dim, 0.0);
    for (const auto& v0 : obj) {
      const Vec v = prep(v0);
      for (std::size_t i = 0; i < dim; ++i) {
        mu[i] += v[i] / obj.size();
        center[i] += v[i];
      }
      ++count;
    }
    means.push_back(mu);
  }
  for (double& x : center) x /= count;
  if (global_center) center = *global_center;
  LdaCategory out;
  for (std::size_t c = 0; c < groups.size(); ++c) {
    double s = 0;
    for (std::size_t i = 0; i < dim; ++i) s += (means[c][i] - center[i]) * (means[c][i] - center[i]);
    out.inter += s / groups.size();
    double w = 0;
    for (const auto& v0 : groups[c]) {
      const Vec v = prep(v0);
      for (std::size_t i = 0; i < dim; ++i) w += (v[i] - means[c][i]) * (v[i] - means[c][i]);
    }
    out.intra += w / groups[c].size() / groups.size();
  }
  return out;
}

}  // namespace oracle
