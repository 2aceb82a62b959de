#pragma once

// RunConfig: one JSON document bundling generator, split, training, network
// and evaluation settings. Every field has a default; unknown keys are errors.

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "persistnet/errors.hpp"
#include "persistnet/net.hpp"
#include "persistnet/synthdata.hpp"

namespace persistnet::cli {

struct EvalOptions {
  int recall_points = 100;
  bool lda_normalize = true;
  bool lda_global_mean = false;
};

struct RunConfig {
  GeneratorConfig generator;
  SplitSpec split;
  std::uint64_t split_seed = 3;
  TrainConfig train;
  std::vector<int> layer_sizes = {256, 64};  // after the input layer
  EvalOptions eval;
  std::string output_dir = "out";

  std::vector<int> layer_dims(std::size_t input_dim) const {
    std::vector<int> dims{static_cast<int>(input_dim)};
    dims.insert(dims.end(), layer_sizes.begin(), layer_sizes.end());
    return dims;
  }
};

namespace detail {

using json = nlohmann::json;

/// Walks one object, assigning known keys and rejecting the rest.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError("config section '" + path_ + "' must be an object");
    for (auto it = j_.begin(); it != j_.end(); ++it) unclaimed_.push_back(it.key());
  }

  template <typename T>
  Section& field(const char* key, T& out) {
    claim(key);
    if (j_.contains(key)) {
      try {
        out = j_.at(key).get<T>();
      } catch (const nlohmann::json::exception&) {
        throw ConfigError("config key '" + qualified(key) + "' has the wrong type");
      }
    }
    return *this;
  }

  bool has(const char* key) const { return j_.contains(key); }
  const json& at(const char* key) {
    claim(key);
    return j_.at(key);
  }
  std::string qualified(const char* key) const {
    return path_.empty() ? std::string(key) : path_ + "." + key;
  }

  void finish() const {
    if (!unclaimed_.empty()) {
      throw ConfigError("unknown config key '" +
                        (path_.empty() ? unclaimed_.front() : path_ + "." + unclaimed_.front()) + "'");
    }
  }

 private:
  void claim(const std::string& key) { std::erase(unclaimed_, key); }

  const json& j_;
  std::string path_;
  std::vector<std::string> unclaimed_;
};

}  // namespace detail

inline RunConfig parse_run_config(const nlohmann::json& j) {
  RunConfig rc;
  detail::Section top(j, "");
  if (top.has("generator")) {
    auto& g = rc.generator;
    detail::Section s(top.at("generator"), "generator");
    s.field("n_categories", g.n_categories)
        .field("objects_per_category", g.objects_per_category)
        .field("views_per_object", g.views_per_object)
        .field("latent_dim_category", g.latent_dim_category)
        .field("latent_dim_object", g.latent_dim_object)
        .field("feature_dim", g.feature_dim)
        .field("amp_category", g.amp_category)
        .field("amp_object", g.amp_object)
        .field("amp_view", g.amp_view)
        .field("noise_sigma", g.noise_sigma)
        .field("mixing_seed", g.mixing_seed)
        .field("sample_seed", g.sample_seed)
        .finish();
  }
  if (top.has("split")) {
    auto& sp = rc.split;
    detail::Section s(top.at("split"), "split");
    s.field("train_objects", sp.train_objects)
        .field("validation_objects", sp.validation_objects)
        .field("novel_instance_objects", sp.novel_instance_objects)
        .field("held_out_categories", sp.held_out_categories)
        .field("held_out_count", sp.held_out_count)
        .field("seed", rc.split_seed)
        .finish();
  }
  if (top.has("train")) {
    auto& t = rc.train;
    detail::Section s(top.at("train"), "train");
    s.field("margin", t.margin)
        .field("weight_decay", t.weight_decay)
        .field("base_lr", t.base_lr)
        .field("lr_drop_factor", t.lr_drop_factor)
        .field("lr_drop_every", t.lr_drop_every)
        .field("momentum", t.momentum)
        .field("total_iters", t.total_iters)
        .field("batch_positive_pairs", t.batch_positive_pairs)
        .field("hard_negatives_per_pair", t.hard_negatives_per_pair)
        .field("random_negatives_per_pair", t.random_negatives_per_pair)
        .field("seed", t.seed)
        .finish();
  }
  if (top.has("net")) {
    detail::Section s(top.at("net"), "net");
    s.field("layers", rc.layer_sizes).finish();
  }
  if (top.has("eval")) {
    detail::Section s(top.at("eval"), "eval");
    std::string center = rc.eval.lda_global_mean ? "global" : "category";
    s.field("recall_points", rc.eval.recall_points)
        .field("lda_normalize", rc.eval.lda_normalize)
        .field("lda_center", center)
        .finish();
    if (center != "global" && center != "category") {
      throw ConfigError("config key 'eval.lda_center' must be \"category\" or \"global\"");
    }
    rc.eval.lda_global_mean = center == "global";
  }
  top.field("output_dir", rc.output_dir);
  top.finish();

  rc.generator.check();
  rc.train.check();
  if (rc.layer_sizes.empty()) throw ConfigError("net.layers must list at least one layer size");
  for (int s : rc.layer_sizes) {
    if (s < 1) throw ConfigError("net.layers entries must be >= 1");
  }
  if (rc.eval.recall_points < 1) throw ConfigError("eval.recall_points must be >= 1");
  return rc;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config: " + path);
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config " + path + " is not valid JSON: " + e.what());
  }
  return parse_run_config(j);
}

/// Effective configuration, fully expanded; hashed into every manifest.
inline nlohmann::ordered_json to_json(const RunConfig& rc) {
  const auto& g = rc.generator;
  nlohmann::ordered_json j;
  j["generator"] = {{"n_categories", g.n_categories},
                    {"objects_per_category", g.objects_per_category},
                    {"views_per_object", g.views_per_object},
                    {"latent_dim_category", g.latent_dim_category},
                    {"latent_dim_object", g.latent_dim_object},
                    {"feature_dim", g.feature_dim},
                    {"amp_category", g.amp_category},
                    {"amp_object", g.amp_object},
                    {"amp_view", g.amp_view},
                    {"noise_sigma", g.noise_sigma},
                    {"mixing_seed", g.mixing_seed},
                    {"sample_seed", g.sample_seed}};
  j["split"] = {{"train_objects", rc.split.train_objects},
                {"validation_objects", rc.split.validation_objects},
                {"novel_instance_objects", rc.split.novel_instance_objects},
                {"held_out_categories", rc.split.held_out_categories},
                {"held_out_count", rc.split.held_out_count},
                {"seed", rc.split_seed}};
  j["train"] = rc.train;
  j["net"] = {{"layers", rc.layer_sizes}};
  j["eval"] = {{"recall_points", rc.eval.recall_points},
               {"lda_normalize", rc.eval.lda_normalize},
               {"lda_center", rc.eval.lda_global_mean ? "global" : "category"}};
  j["output_dir"] = rc.output_dir;
  return j;
}

}  // namespace persistnet::cli
