#pragma once

// Subcommand implementations behind tools/persistnet. Each command throws a
// persistnet::Error on failure; exit_code_for maps errors to process exit codes.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "persistnet/cli/manifest.hpp"
#include "persistnet/cli/run_config.hpp"
#include "persistnet/manifold.hpp"
#include "persistnet/net.hpp"
#include "persistnet/retrieval.hpp"
#include "persistnet/synthdata.hpp"
#include "persistnet/training.hpp"

namespace persistnet::cli {

namespace fs = std::filesystem;

enum ExitCode : int { kOk = 0, kConfigError = 2, kIoError = 3, kNumericFailure = 4 };

inline int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const IoError*>(&e) || dynamic_cast<const FormatError*>(&e)) return kIoError;
  if (dynamic_cast<const ZeroNormInput*>(&e) || dynamic_cast<const NonFiniteValue*>(&e) ||
      dynamic_cast<const DegenerateIntra*>(&e) || dynamic_cast<const DegenerateInput*>(&e) ||
      dynamic_cast<const NoRelevant*>(&e) || dynamic_cast<const ReproducibilityMismatch*>(&e)) {
    return kNumericFailure;
  }
  if (dynamic_cast<const fs::filesystem_error*>(&e)) return kIoError;
  // config, dimension and precondition failures
  return kConfigError;
}

struct CommonOptions {
  std::optional<std::string> config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
};

inline RunConfig resolve_config(const CommonOptions& o) {
  RunConfig rc = o.config_path ? load_run_config(*o.config_path) : RunConfig{};
  return rc;
}

inline void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir + ": " + ec.message());
}

inline std::string join(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path);
  os << text;
  if (!os) throw IoError("write failed: " + path);
}

inline void report_manifest(ManifestStatus s, const std::string& path, std::ostream& out) {
  out << (s == ManifestStatus::verified ? "manifest verified: " : "manifest written: ") << path << '\n';
}

inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// gen

struct GenResult {
  std::string train, validation, novel_instance, novel_category, manifest;
};

/// --seed overrides generator.sample_seed; --out overrides output_dir.
inline GenResult cmd_gen(const CommonOptions& o, std::ostream& out) {
  RunConfig rc = resolve_config(o);
  if (o.seed) rc.generator.sample_seed = *o.seed;
  const std::string dir = o.out.value_or(rc.output_dir);
  ensure_dir(dir);

  const MultiViewDataset all = generate(rc.generator);
  const DatasetSplits s = split(all, rc.split, rc.split_seed);
  GenResult r{join(dir, "train.tsv"), join(dir, "validation.tsv"), join(dir, "novel_instance.tsv"),
              join(dir, "novel_category.tsv"), join(dir, "manifest_gen.json")};
  save(s.train, r.train);
  save(s.validation, r.validation);
  save(s.novel_instance, r.novel_instance);
  save(s.novel_category, r.novel_category);

  Manifest m;
  m.command = "gen";
  m.config = to_json(rc);
  m.seeds = {{"mixing_seed", rc.generator.mixing_seed},
             {"sample_seed", rc.generator.sample_seed},
             {"split_seed", rc.split_seed}};
  for (const auto* p : {&r.train, &r.validation, &r.novel_instance, &r.novel_category}) {
    m.artifacts[fs::path(*p).filename().string()] = file_sha256(*p);
  }
  out << "train " << s.train.size() << " records, validation " << s.validation.size()
      << ", novel_instance " << s.novel_instance.size() << ", novel_category "
      << s.novel_category.size() << '\n';
  report_manifest(write_manifest(m, r.manifest), r.manifest, out);
  return r;
}

// ---------------------------------------------------------------------------
// train

struct TrainOptions {
  CommonOptions common;  // common.out = checkpoint path
  std::string train_path;
  std::string validation_path;
};

struct TrainCommandResult {
  std::string net_path, log_path, manifest_path;
  double validation_map = 0.0;
};

inline double validation_instance_map(const EmbeddingNet& net, const MultiViewDataset& val,
                                      int recall_points) {
  return instance_retrieval(embed_all(net, features_of(val)), val, default_recall_grid(recall_points))
      .map_score;
}

inline std::string sibling_path(const std::string& path, const std::string& suffix) {
  fs::path p(path);
  return (p.parent_path() / (p.stem().string() + suffix)).string();
}

inline void require_same_dim(const MultiViewDataset& a, const MultiViewDataset& b, const char* what) {
  if (a.feature_dim != b.feature_dim) throw DimMismatch(a.feature_dim, b.feature_dim, what);
}

/// --seed overrides train.seed; --out is the checkpoint path.
inline TrainCommandResult cmd_train(const TrainOptions& o, std::ostream& out) {
  RunConfig rc = resolve_config(o.common);
  if (o.common.seed) rc.train.seed = *o.common.seed;
  const MultiViewDataset train_set = load(o.train_path);
  const MultiViewDataset val = load(o.validation_path);
  require_same_dim(train_set, val, "validation features vs training features");

  TrainCommandResult r;
  r.net_path = o.common.out.value_or(join(rc.output_dir, "net.json"));
  if (fs::path(r.net_path).has_parent_path()) ensure_dir(fs::path(r.net_path).parent_path().string());
  r.log_path = sibling_path(r.net_path, ".log.csv");
  r.manifest_path = sibling_path(r.net_path, ".manifest.json");

  const auto dims = rc.layer_dims(train_set.feature_dim);
  const int report_every = std::max(1, rc.train.total_iters / 10);
  TrainResult tr = train(train_set, dims, rc.train, [&](const TrainLogEntry& e, const EmbeddingNet&) {
    if (e.iter % report_every == 0) {
      out << "iter " << e.iter << " lr " << e.lr << " loss " << e.mean_batch_loss << " active "
          << e.fraction_active_triplets << '\n';
    }
  });
  save_net(tr.net, rc.train, r.net_path);
  {
    std::ofstream os(r.log_path, std::ios::binary);
    if (!os) throw IoError("cannot open for writing: " + r.log_path);
    write_train_log_csv(tr.log, os);
  }
  r.validation_map = validation_instance_map(tr.net, val, rc.eval.recall_points);
  out << "validation instance MAP: " << fmt17(r.validation_map) << '\n';

  Manifest m;
  m.command = "train";
  m.config = to_json(rc);
  m.seeds = {{"train_seed", rc.train.seed},
             {"init_seed", init_seed(rc.train)}};
  m.inputs[o.train_path] = file_sha256(o.train_path);
  m.inputs[o.validation_path] = file_sha256(o.validation_path);
  m.artifacts[fs::path(r.net_path).filename().string()] = file_sha256(r.net_path);
  m.artifacts[fs::path(r.log_path).filename().string()] = file_sha256(r.log_path);
  report_manifest(write_manifest(m, r.manifest_path), r.manifest_path, out);
  return r;
}

// ---------------------------------------------------------------------------
// eval / analyze shared

struct FeatureSource {
  std::optional<std::string> net_path;  // nullopt = raw input features
};

inline std::vector<FeatureVector> features_for(const FeatureSource& src, const MultiViewDataset& d) {
  if (!src.net_path) return features_of(d);
  const EmbeddingNet net = load_net(*src.net_path);
  if (net.input_dim() != d.feature_dim) {
    throw DimMismatch(net.input_dim(), d.feature_dim, "network input dim vs dataset feature dim");
  }
  return embed_all(net, features_of(d));
}

inline void record_source(Manifest& m, const FeatureSource& src, const std::string& data_path) {
  m.inputs[data_path] = file_sha256(data_path);
  if (src.net_path) {
    m.inputs[*src.net_path] = file_sha256(*src.net_path);
  } else {
    m.config["raw"] = true;
  }
}

// ---------------------------------------------------------------------------
// eval

enum class Task { instance, categorical };

inline Task parse_task(const std::string& s) {
  if (s == "instance") return Task::instance;
  if (s == "categorical") return Task::categorical;
  throw ConfigError("unknown task '" + s + "' (expected instance or categorical)");
}

struct EvalOptionsCli {
  CommonOptions common;  // common.out = output directory
  FeatureSource source;
  std::string data_path;
  Task task = Task::instance;
};

struct EvalCommandResult {
  RetrievalReport report;
  std::string report_path, pr_path, manifest_path;
};

inline EvalCommandResult cmd_eval(const EvalOptionsCli& o, std::ostream& out) {
  const RunConfig rc = resolve_config(o.common);
  const MultiViewDataset d = load(o.data_path);
  const auto f = features_for(o.source, d);
  const auto grid = default_recall_grid(rc.eval.recall_points);
  const std::string task = o.task == Task::instance ? "instance" : "categorical";

  EvalCommandResult r;
  r.report = o.task == Task::instance ? instance_retrieval(f, d, grid) : categorical_retrieval(f, d, grid);
  const std::string dir = o.common.out.value_or(rc.output_dir);
  ensure_dir(dir);
  r.report_path = join(dir, task + "_report.json");
  r.pr_path = join(dir, task + "_pr.csv");
  r.manifest_path = join(dir, "manifest_eval_" + task + ".json");
  write_text(r.report_path, report_to_json(r.report, d).dump(1) + "\n");
  {
    std::ofstream os(r.pr_path, std::ios::binary);
    if (!os) throw IoError("cannot open for writing: " + r.pr_path);
    write_pr_csv(r.report.pr_points, os);
  }
  out << task << " retrieval MAP: " << fmt17(r.report.map_score) << " over "
      << r.report.per_query_ap.size() << " queries (" << r.report.excluded_queries << " excluded)\n";

  Manifest m;
  m.command = "eval";
  m.config = to_json(rc);
  m.config["task"] = task;
  record_source(m, o.source, o.data_path);
  m.seeds = nlohmann::ordered_json::object();
  m.artifacts[fs::path(r.report_path).filename().string()] = file_sha256(r.report_path);
  m.artifacts[fs::path(r.pr_path).filename().string()] = file_sha256(r.pr_path);
  report_manifest(write_manifest(m, r.manifest_path), r.manifest_path, out);
  return r;
}

// ---------------------------------------------------------------------------
// analyze

enum class Analysis { matrix, tree, lda, correlate };

inline Analysis parse_analysis(const std::string& s) {
  if (s == "matrix") return Analysis::matrix;
  if (s == "tree") return Analysis::tree;
  if (s == "lda") return Analysis::lda;
  if (s == "correlate") return Analysis::correlate;
  throw ConfigError("unknown analysis '" + s + "' (expected matrix, tree, lda or correlate)");
}

struct AnalyzeOptions {
  CommonOptions common;  // common.out = output directory
  FeatureSource source;
  std::string data_path;
  Analysis what = Analysis::matrix;
  std::optional<std::string> reference_path;
};

struct AnalyzeResult {
  std::string artifact_path, manifest_path;
  std::optional<double> correlation;
  std::optional<double> lda_mean;
};

inline AnalyzeResult cmd_analyze(const AnalyzeOptions& o, std::ostream& out) {
  const RunConfig rc = resolve_config(o.common);
  const MultiViewDataset d = load(o.data_path);
  const auto f = features_for(o.source, d);
  const std::string dir = o.common.out.value_or(rc.output_dir);
  ensure_dir(dir);

  AnalyzeResult r;
  Manifest m;
  m.command = "analyze";
  m.config = to_json(rc);
  m.seeds = nlohmann::ordered_json::object();
  std::string what;
  switch (o.what) {
    case Analysis::matrix: {
      what = "matrix";
      r.artifact_path = join(dir, "matrix.csv");
      std::ofstream os(r.artifact_path, std::ios::binary);
      if (!os) throw IoError("cannot open for writing: " + r.artifact_path);
      write_matrix_csv(pairwise_matrix(f), os);
      out << "distance matrix " << f.size() << "x" << f.size() << " written to " << r.artifact_path << '\n';
      break;
    }
    case Analysis::tree: {
      what = "tree";
      r.artifact_path = join(dir, "tree.txt");
      save_dendrogram(hac_nearest_point(pairwise_matrix(f)), r.artifact_path);
      out << "dendrogram over " << f.size() << " leaves written to " << r.artifact_path << '\n';
      break;
    }
    case Analysis::lda: {
      what = "lda";
      r.artifact_path = join(dir, "lda.json");
      const auto rep = lda_score(f, d, {rc.eval.lda_normalize, rc.eval.lda_global_mean});
      write_text(r.artifact_path, lda_to_json(rep).dump(1) + "\n");
      r.lda_mean = rep.mean_score;
      out << "mean LDA score: " << fmt17(rep.mean_score) << " (" << rep.degenerate_categories
          << " degenerate categories excluded)\n";
      break;
    }
    case Analysis::correlate: {
      what = "correlate";
      if (!o.reference_path) throw ConfigError("analyze correlate requires --reference");
      const Dendrogram ref = load_dendrogram(*o.reference_path);
      const auto tc = tree_correlation(f, ref);
      r.artifact_path = join(dir, "correlation.json");
      nlohmann::ordered_json j;
      j["spearman"] = tc.rho;
      j["n"] = tc.n;
      j["pairs"] = tc.pairs;
      j["reference"] = *o.reference_path;
      write_text(r.artifact_path, j.dump(1) + "\n");
      r.correlation = tc.rho;
      m.inputs[*o.reference_path] = file_sha256(*o.reference_path);
      out << "spearman " << fmt17(tc.rho) << " over " << tc.pairs << " pairs (n=" << tc.n << ")\n";
      break;
    }
  }
  m.config["analysis"] = what;
  record_source(m, o.source, o.data_path);
  m.artifacts[fs::path(r.artifact_path).filename().string()] = file_sha256(r.artifact_path);
  r.manifest_path = join(dir, "manifest_analyze_" + what + ".json");
  report_manifest(write_manifest(m, r.manifest_path), r.manifest_path, out);
  return r;
}

// ---------------------------------------------------------------------------
// sweep-margin

struct SweepOptions {
  CommonOptions common;  // common.out = output directory
  std::vector<double> margins;
  std::string train_path;
  std::string validation_path;
};

struct SweepRow {
  double margin = 0.0;
  double validation_map = 0.0;
  bool best = false;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::string table_path, manifest_path;
};

/// One training run per margin with identical seeds; the best row maximizes
/// validation MAP, ties going to the smallest margin.
inline SweepResult cmd_sweep_margin(const SweepOptions& o, std::ostream& out) {
  if (o.margins.empty()) throw ConfigError("sweep-margin needs at least one margin");
  RunConfig rc = resolve_config(o.common);
  if (o.common.seed) rc.train.seed = *o.common.seed;
  const MultiViewDataset train_set = load(o.train_path);
  const MultiViewDataset val = load(o.validation_path);
  require_same_dim(train_set, val, "validation features vs training features");
  const auto dims = rc.layer_dims(train_set.feature_dim);

  SweepResult r;
  for (double margin : o.margins) {
    TrainConfig cfg = rc.train;
    cfg.margin = margin;
    const TrainResult tr = train(train_set, dims, cfg);
    r.rows.push_back({margin, validation_instance_map(tr.net, val, rc.eval.recall_points), false});
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < r.rows.size(); ++i) {
    const auto& a = r.rows[i];
    const auto& b = r.rows[best];
    if (a.validation_map > b.validation_map ||
        (a.validation_map == b.validation_map && a.margin < b.margin)) {
      best = i;
    }
  }
  r.rows[best].best = true;

  const std::string dir = o.common.out.value_or(rc.output_dir);
  ensure_dir(dir);
  r.table_path = join(dir, "margin_sweep.csv");
  std::string csv = "margin,validation_map,best\n";
  out << "margin  validation_map\n";
  for (const auto& row : r.rows) {
    csv += fmt17(row.margin) + "," + fmt17(row.validation_map) + "," + (row.best ? "1" : "0") + "\n";
    out << fmt17(row.margin) << "  " << fmt17(row.validation_map) << (row.best ? "  *best" : "") << '\n';
  }
  write_text(r.table_path, csv);

  Manifest m;
  m.command = "sweep-margin";
  m.config = to_json(rc);
  m.config["margins"] = o.margins;
  m.seeds = {{"train_seed", rc.train.seed}};
  m.inputs[o.train_path] = file_sha256(o.train_path);
  m.inputs[o.validation_path] = file_sha256(o.validation_path);
  m.artifacts[fs::path(r.table_path).filename().string()] = file_sha256(r.table_path);
  r.manifest_path = join(dir, "manifest_sweep_margin.json");
  report_manifest(write_manifest(m, r.manifest_path), r.manifest_path, out);
  return r;
}

}  // namespace persistnet::cli
