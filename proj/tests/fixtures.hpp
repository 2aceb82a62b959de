#pragma once

#include <random>
#include <string>
#include <vector>

#include "persistnet/dataset.hpp"
#include "persistnet/synthdata.hpp"

namespace fixtures {

using persistnet::FeatureVector;
using persistnet::MultiViewDataset;

inline FeatureVector vec(std::initializer_list<double> xs) {
  FeatureVector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

inline FeatureVector random_vec(std::mt19937_64& rng, int dim, double sd = 1.0) {
  std::normal_distribution<double> n(0.0, sd);
  FeatureVector v(dim);
  for (int i = 0; i < dim; ++i) v[i] = n(rng);
  return v;
}

/// Random features laid out category-major: cats x objs x views records.
inline MultiViewDataset random_dataset(int cats, int objs, int views, int dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  MultiViewDataset d;
  d.feature_dim = static_cast<std::size_t>(dim);
  d.views_per_object = views;
  for (int c = 0; c < cats; ++c)
    for (int o = 0; o < objs; ++o)
      for (int v = 0; v < views; ++v)
        d.records.push_back({persistnet::object_name(c, o), persistnet::category_name(c), v,
                             random_vec(rng, dim)});
  return d;
}

/// A generator config small enough for unit tests.
inline persistnet::GeneratorConfig small_generator() {
  persistnet::GeneratorConfig g;
  g.n_categories = 4;
  g.objects_per_category = 4;
  g.views_per_object = 6;
  g.latent_dim_category = 3;
  g.latent_dim_object = 3;
  g.feature_dim = 12;
  return g;
}

/// One-hot feature per object, shared by all of its views.
inline std::vector<FeatureVector> one_hot_per_object(const MultiViewDataset& d) {
  const persistnet::DatasetIndex idx(d);
  std::vector<FeatureVector> out;
  for (std::size_t i = 0; i < d.size(); ++i) {
    FeatureVector v = FeatureVector::Zero(static_cast<Eigen::Index>(idx.num_objects()));
    v[idx.object_of_record[i]] = 1.0;
    out.push_back(v);
  }
  return out;
}

}  // namespace fixtures
