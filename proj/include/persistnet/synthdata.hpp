#pragma once

// Procedural multi-view data: category, object and view factors pushed
// through a fixed rectified random mixer, plus the object-level splits and the
// persistnet-data-v1 text format.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <numbers>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <nlohmann/json.hpp>

#include "persistnet/dataset.hpp"
#include "persistnet/errors.hpp"
#include "persistnet/random.hpp"

namespace persistnet {

inline constexpr const char* kDataFormatVersion = "persistnet-data-v1";

struct GeneratorConfig {
  int n_categories = 35;  // 29 trained + 6 held out
  int objects_per_category = 12;
  int views_per_object = 12;
  int latent_dim_category = 8;
  int latent_dim_object = 8;
  int feature_dim = 128;
  double amp_category = 1.0;
  double amp_object = 0.6;
  double amp_view = 3.0;
  double noise_sigma = 0.05;
  std::uint64_t mixing_seed = 1;
  std::uint64_t sample_seed = 2;

  int raw_dim() const { return latent_dim_category + latent_dim_object + 2; }

  void check() const {
    if (n_categories <= 0 || objects_per_category <= 0 || views_per_object <= 0 ||
        latent_dim_category <= 0 || latent_dim_object <= 0 || feature_dim <= 0) {
      throw ConfigError("generator: all counts must be positive");
    }
    if (amp_category < 0 || amp_object < 0 || amp_view < 0 || noise_sigma < 0) {
      throw ConfigError("generator: amplitudes and noise_sigma must be >= 0");
    }
  }
};

inline std::string category_name(int c) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "cat%03d", c);
  return buf;
}

inline std::string object_name(int c, int o) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "cat%03d_obj%03d", c, o);
  return buf;
}

/// Pre-mixing vectors concat(amp_c * c, amp_o * o, amp_v * (cos t_k, sin t_k)),
/// one per record in generation order (category, object, view).
struct LatentRecords {
  std::vector<Record> records;  // features hold the raw vector
  std::vector<FeatureVector> noise;
};

inline LatentRecords generate_latents(const GeneratorConfig& cfg) {
  cfg.check();
  Rng rng(cfg.sample_seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const int dc = cfg.latent_dim_category;
  const int dobj = cfg.latent_dim_object;
  const int raw_dim = cfg.raw_dim();
  const int v_count = cfg.views_per_object;

  LatentRecords out;
  const auto total = static_cast<std::size_t>(cfg.n_categories) * cfg.objects_per_category *
                     cfg.views_per_object;
  out.records.reserve(total);
  out.noise.reserve(total);
  for (int c = 0; c < cfg.n_categories; ++c) {
    FeatureVector cat(dc);
    for (int i = 0; i < dc; ++i) cat[i] = normal(rng);
    for (int o = 0; o < cfg.objects_per_category; ++o) {
      FeatureVector obj(dobj);
      for (int i = 0; i < dobj; ++i) obj[i] = normal(rng);
      for (int k = 0; k < v_count; ++k) {
        const double theta = 2.0 * std::numbers::pi * k / v_count;
        FeatureVector raw(raw_dim);
        raw.head(dc) = cfg.amp_category * cat;
        raw.segment(dc, dobj) = cfg.amp_object * obj;
        raw[dc + dobj] = cfg.amp_view * std::cos(theta);
        raw[dc + dobj + 1] = cfg.amp_view * std::sin(theta);
        FeatureVector eps(cfg.feature_dim);
        for (int i = 0; i < cfg.feature_dim; ++i) eps[i] = cfg.noise_sigma * normal(rng);
        out.records.push_back({object_name(c, o), category_name(c), k, std::move(raw)});
        out.noise.push_back(std::move(eps));
      }
    }
  }
  return out;
}

/// feature_dim x raw_dim matrix, entries N(0, sd = 1/sqrt(raw_dim)).
inline Eigen::MatrixXd generate_mixer(const GeneratorConfig& cfg) {
  Rng rng(cfg.mixing_seed);
  std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(double(cfg.raw_dim())));
  Eigen::MatrixXd m(cfg.feature_dim, cfg.raw_dim());
  for (int r = 0; r < m.rows(); ++r)
    for (int c = 0; c < m.cols(); ++c) m(r, c) = normal(rng);
  return m;
}

inline MultiViewDataset generate(const GeneratorConfig& cfg) {
  LatentRecords latents = generate_latents(cfg);
  const Eigen::MatrixXd mixer = generate_mixer(cfg);
  MultiViewDataset d;
  d.feature_dim = static_cast<std::size_t>(cfg.feature_dim);
  d.views_per_object = cfg.views_per_object;
  d.records = std::move(latents.records);
  for (std::size_t i = 0; i < d.records.size(); ++i) {
    FeatureVector mixed = (mixer * d.records[i].features).cwiseMax(0.0);
    d.records[i].features = mixed + latents.noise[i];
  }
  return d;
}

// ---------------------------------------------------------------------------
// Splits

struct SplitSpec {
  int train_objects = 8;
  int validation_objects = 2;
  int novel_instance_objects = 2;
  /// Explicit held-out categories; when empty the last `held_out_count`
  /// categories (in order of first appearance) are held out.
  std::vector<std::string> held_out_categories;
  int held_out_count = 6;
};

struct DatasetSplits {
  MultiViewDataset train;
  MultiViewDataset validation;
  MultiViewDataset novel_instance;
  MultiViewDataset novel_category;
};

/// Object-level partition. Objects of each retained category are shuffled with
/// a per-category seed and dealt out as validation, novel instance, then train;
/// any objects beyond the three counts go to train.
inline DatasetSplits split(const MultiViewDataset& d, const SplitSpec& spec, std::uint64_t seed) {
  if (spec.train_objects < 0 || spec.validation_objects < 0 || spec.novel_instance_objects < 0 ||
      spec.held_out_count < 0) {
    throw SplitInfeasible("split counts must be non-negative");
  }
  const DatasetIndex idx(d);
  std::set<int> held;
  if (!spec.held_out_categories.empty()) {
    for (const auto& name : spec.held_out_categories) {
      auto it = std::find(idx.category_ids.begin(), idx.category_ids.end(), name);
      if (it == idx.category_ids.end()) {
        throw SplitInfeasible("held-out category not in dataset: " + name);
      }
      held.insert(static_cast<int>(it - idx.category_ids.begin()));
    }
  } else {
    const int n = static_cast<int>(idx.num_categories());
    if (spec.held_out_count > n) {
      throw SplitInfeasible("held_out_count " + std::to_string(spec.held_out_count) +
                            " exceeds category count " + std::to_string(n));
    }
    for (int c = n - spec.held_out_count; c < n; ++c) held.insert(c);
  }

  // 0 train, 1 validation, 2 novel instance, 3 novel category
  std::vector<int> bucket_of_object(idx.num_objects(), 0);
  for (int c = 0; c < static_cast<int>(idx.num_categories()); ++c) {
    const auto& objs = idx.objects_of_category[c];
    if (held.count(c)) {
      for (int o : objs) bucket_of_object[o] = 3;
      continue;
    }
    const int need = spec.train_objects + spec.validation_objects + spec.novel_instance_objects;
    if (need > static_cast<int>(objs.size())) {
      throw SplitInfeasible("category " + idx.category_ids[c] + " has " +
                            std::to_string(objs.size()) + " objects, split needs " +
                            std::to_string(need));
    }
    std::vector<int> order = objs;
    Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(c)}));
    std::shuffle(order.begin(), order.end(), rng);
    std::size_t pos = 0;
    for (int k = 0; k < spec.validation_objects; ++k) bucket_of_object[order[pos++]] = 1;
    for (int k = 0; k < spec.novel_instance_objects; ++k) bucket_of_object[order[pos++]] = 2;
    for (; pos < order.size(); ++pos) bucket_of_object[order[pos]] = 0;
  }

  DatasetSplits out;
  MultiViewDataset* buckets[4] = {&out.train, &out.validation, &out.novel_instance,
                                  &out.novel_category};
  for (auto* b : buckets) {
    b->feature_dim = d.feature_dim;
    b->views_per_object = d.views_per_object;
  }
  for (std::size_t i = 0; i < d.records.size(); ++i) {
    buckets[bucket_of_object[idx.object_of_record[i]]]->records.push_back(d.records[i]);
  }
  if (out.train.empty()) throw SplitInfeasible("train split would be empty");
  return out;
}

// ---------------------------------------------------------------------------
// persistnet-data-v1 I/O

namespace detail {

inline void append_double(std::string& out, double v) {
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  out.append(buf, res.ptr);
}

inline bool valid_id(std::string_view s) {
  return !s.empty() && s.find_first_of("\t\n\r") == std::string_view::npos;
}

}  // namespace detail

inline void save(const MultiViewDataset& d, std::ostream& os) {
  nlohmann::ordered_json header;
  header["version"] = kDataFormatVersion;
  header["feature_dim"] = d.feature_dim;
  header["views_per_object"] = d.views_per_object;
  os << header.dump() << '\n';
  std::string line;
  for (const Record& r : d.records) {
    if (!detail::valid_id(r.object_id) || !detail::valid_id(r.category_id)) {
      throw Error("ids must be non-empty and free of tabs/newlines");
    }
    line.clear();
    line += r.object_id;
    line += '\t';
    line += r.category_id;
    line += '\t';
    line += std::to_string(r.view_index);
    line += '\t';
    for (Eigen::Index i = 0; i < r.features.size(); ++i) {
      if (i) line += ',';
      detail::append_double(line, r.features[i]);
    }
    line += '\n';
    os << line;
  }
}

inline void save(const MultiViewDataset& d, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path);
  save(d, os);
  os.flush();
  if (!os) throw IoError("write failed: " + path);
}

inline MultiViewDataset load(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line.empty()) {
    throw FormatError(1, "missing persistnet-data-v1 header");
  }
  MultiViewDataset d;
  try {
    auto header = nlohmann::json::parse(line);
    if (header.at("version").get<std::string>() != kDataFormatVersion) {
      throw FormatError(1, "unsupported version " + header.at("version").dump());
    }
    const auto fd = header.at("feature_dim").get<long long>();
    const auto vpo = header.at("views_per_object").get<long long>();
    if (fd <= 0 || vpo <= 0) throw FormatError(1, "feature_dim and views_per_object must be positive");
    d.feature_dim = static_cast<std::size_t>(fd);
    d.views_per_object = static_cast<int>(vpo);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(1, std::string("bad header: ") + e.what());
  }

  std::set<std::pair<std::string, int>> seen;
  std::map<std::string, std::string> category_of;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::string_view sv(line);
    std::string_view fields[4];
    for (int f = 0; f < 3; ++f) {
      auto tab = sv.find('\t');
      if (tab == std::string_view::npos) throw FormatError(lineno, "expected 4 tab-separated fields");
      fields[f] = sv.substr(0, tab);
      sv.remove_prefix(tab + 1);
    }
    fields[3] = sv;
    if (fields[3].find('\t') != std::string_view::npos) {
      throw FormatError(lineno, "expected 4 tab-separated fields");
    }
    Record r;
    r.object_id = std::string(fields[0]);
    r.category_id = std::string(fields[1]);
    if (r.object_id.empty() || r.category_id.empty()) throw FormatError(lineno, "empty id");
    {
      auto [p, ec] = std::from_chars(fields[2].data(), fields[2].data() + fields[2].size(),
                                     r.view_index);
      if (ec != std::errc() || p != fields[2].data() + fields[2].size()) {
        throw FormatError(lineno, "bad view_index");
      }
    }
    if (r.view_index < 0 || r.view_index >= d.views_per_object) {
      throw FormatError(lineno, "view_index out of range");
    }
    std::vector<double> values;
    values.reserve(d.feature_dim);
    const char* p = fields[3].data();
    const char* end = p + fields[3].size();
    while (true) {
      double v = 0;
      auto res = std::from_chars(p, end, v);
      if (res.ec != std::errc()) throw FormatError(lineno, "bad feature value");
      if (!std::isfinite(v)) throw FormatError(lineno, "non-finite feature value");
      values.push_back(v);
      p = res.ptr;
      if (p == end) break;
      if (*p != ',') throw FormatError(lineno, "features must be comma-separated");
      ++p;
    }
    if (values.size() != d.feature_dim) {
      throw FormatError(lineno, "expected " + std::to_string(d.feature_dim) +
                                    " features, got " + std::to_string(values.size()));
    }
    r.features = Eigen::Map<const FeatureVector>(values.data(), static_cast<Eigen::Index>(values.size()));
    if (!seen.emplace(r.object_id, r.view_index).second) {
      throw FormatError(lineno, "duplicate (object, view) pair");
    }
    auto [it, inserted] = category_of.emplace(r.object_id, r.category_id);
    if (!inserted && it->second != r.category_id) {
      throw FormatError(lineno, "object " + r.object_id + " listed under two categories");
    }
    d.records.push_back(std::move(r));
  }
  return d;
}

inline MultiViewDataset load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open for reading: " + path);
  return load(is);
}

}  // namespace persistnet
