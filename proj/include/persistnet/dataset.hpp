#pragma once

#include <cstddef>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "persistnet/errors.hpp"
#include "persistnet/geometry.hpp"

namespace persistnet {

struct Record {
  std::string object_id;
  std::string category_id;
  int view_index = 0;
  FeatureVector features;

  friend bool operator==(const Record& a, const Record& b) {
    return a.object_id == b.object_id && a.category_id == b.category_id &&
           a.view_index == b.view_index && a.features.size() == b.features.size() &&
           a.features == b.features;
  }
};

/// Multi-view records: one feature vector per (object, view). Objects belong to
/// exactly one category. Record order is significant (ties are broken by index).
struct MultiViewDataset {
  std::size_t feature_dim = 0;
  int views_per_object = 0;
  std::vector<Record> records;

  std::size_t size() const noexcept { return records.size(); }
  bool empty() const noexcept { return records.empty(); }

  friend bool operator==(const MultiViewDataset& a, const MultiViewDataset& b) {
    return a.feature_dim == b.feature_dim && a.views_per_object == b.views_per_object &&
           a.records == b.records;
  }
};

/// Input features of every record, in record order.
inline std::vector<FeatureVector> features_of(const MultiViewDataset& d) {
  std::vector<FeatureVector> out;
  out.reserve(d.size());
  for (const auto& r : d.records) out.push_back(r.features);
  return out;
}

/// Throws Error (or DimMismatch) when a dataset breaks its structural invariants.
inline void validate(const MultiViewDataset& d) {
  if (d.feature_dim == 0) throw Error("dataset feature_dim must be positive");
  if (d.views_per_object <= 0) throw Error("dataset views_per_object must be positive");
  std::set<std::pair<std::string, int>> seen;
  std::map<std::string, std::string> category_of;
  for (std::size_t i = 0; i < d.records.size(); ++i) {
    const Record& r = d.records[i];
    if (static_cast<std::size_t>(r.features.size()) != d.feature_dim) {
      throw DimMismatch(d.feature_dim, static_cast<std::size_t>(r.features.size()),
                        "record " + std::to_string(i));
    }
    if (!r.features.allFinite()) {
      throw NonFiniteValue("record " + std::to_string(i) + " has non-finite features");
    }
    if (r.view_index < 0 || r.view_index >= d.views_per_object) {
      throw Error("record " + std::to_string(i) + " view_index out of range");
    }
    if (!seen.emplace(r.object_id, r.view_index).second) {
      throw Error("duplicate (object, view) pair: " + r.object_id + "/" +
                  std::to_string(r.view_index));
    }
    auto [it, inserted] = category_of.emplace(r.object_id, r.category_id);
    if (!inserted && it->second != r.category_id) {
      throw Error("object " + r.object_id + " appears under two categories");
    }
  }
}

/// Integer view of a dataset's grouping. Objects and categories are numbered in
/// order of first appearance.
struct DatasetIndex {
  std::vector<std::string> object_ids;
  std::vector<std::string> category_ids;
  std::vector<int> object_of_record;
  std::vector<int> category_of_record;
  std::vector<int> category_of_object;
  std::vector<std::vector<std::size_t>> records_of_object;
  std::vector<std::vector<std::size_t>> records_of_category;
  std::vector<std::vector<int>> objects_of_category;

  explicit DatasetIndex(const MultiViewDataset& d) {
    std::map<std::string, int> obj_no;
    std::map<std::string, int> cat_no;
    object_of_record.reserve(d.size());
    category_of_record.reserve(d.size());
    for (std::size_t i = 0; i < d.records.size(); ++i) {
      const Record& r = d.records[i];
      auto [cit, cnew] = cat_no.emplace(r.category_id, static_cast<int>(category_ids.size()));
      if (cnew) {
        category_ids.push_back(r.category_id);
        records_of_category.emplace_back();
        objects_of_category.emplace_back();
      }
      auto [oit, onew] = obj_no.emplace(r.object_id, static_cast<int>(object_ids.size()));
      if (onew) {
        object_ids.push_back(r.object_id);
        records_of_object.emplace_back();
        category_of_object.push_back(cit->second);
        objects_of_category[cit->second].push_back(oit->second);
      }
      object_of_record.push_back(oit->second);
      category_of_record.push_back(cit->second);
      records_of_object[oit->second].push_back(i);
      records_of_category[cit->second].push_back(i);
    }
  }

  std::size_t num_objects() const noexcept { return object_ids.size(); }
  std::size_t num_categories() const noexcept { return category_ids.size(); }
};

}  // namespace persistnet
