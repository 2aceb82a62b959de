// persistnet: generate synthetic multi-view data, train an embedding network,
// evaluate retrieval and analyze the learned manifold.

#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "persistnet/cli/commands.hpp"

namespace pc = persistnet::cli;

namespace {

std::vector<double> parse_margins(const std::string& list) {
  std::vector<double> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw persistnet::ConfigError("--margins: '" + item + "' is not a number");
    }
  }
  return out;
}

void add_common(CLI::App* sub, pc::CommonOptions& c, const char* out_help) {
  sub->add_option("--config", c.config_path, "run config JSON");
  sub->add_option("--out", c.out, out_help);
}

void add_source(CLI::App* sub, pc::FeatureSource& src, bool& raw) {
  auto* net = sub->add_option("--net", src.net_path, "trained network checkpoint");
  auto* r = sub->add_flag("--raw", raw, "use the input features directly");
  net->excludes(r);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"persistnet: triplet-loss embeddings on multi-view data"};
  app.require_subcommand(1);

  pc::CommonOptions gen_opts;
  auto* gen = app.add_subcommand("gen", "generate and split a synthetic dataset");
  add_common(gen, gen_opts, "output directory");
  gen->add_option("--seed", gen_opts.seed, "override generator.sample_seed");

  pc::TrainOptions train_opts;
  auto* tr = app.add_subcommand("train", "train an embedding network");
  add_common(tr, train_opts.common, "checkpoint path");
  tr->add_option("--seed", train_opts.common.seed, "override train.seed");
  tr->add_option("--train", train_opts.train_path, "training split")->required();
  tr->add_option("--validation", train_opts.validation_path, "validation split")->required();

  pc::EvalOptionsCli eval_opts;
  bool eval_raw = false;
  std::string task = "instance";
  auto* ev = app.add_subcommand("eval", "retrieval MAP and precision-recall");
  add_common(ev, eval_opts.common, "output directory");
  add_source(ev, eval_opts.source, eval_raw);
  ev->add_option("--data", eval_opts.data_path, "dataset file")->required();
  ev->add_option("--task", task, "instance or categorical");

  pc::AnalyzeOptions an_opts;
  bool an_raw = false;
  std::string what;
  auto* an = app.add_subcommand("analyze", "distance matrix, tree, LDA score or tree correlation");
  add_common(an, an_opts.common, "output directory");
  add_source(an, an_opts.source, an_raw);
  an->add_option("--data", an_opts.data_path, "dataset file")->required();
  an->add_option("--what", what, "matrix, tree, lda or correlate")->required();
  an->add_option("--reference", an_opts.reference_path, "reference tree for correlate");

  pc::SweepOptions sw_opts;
  std::string margins;
  auto* sw = app.add_subcommand("sweep-margin", "train once per margin and compare validation MAP");
  add_common(sw, sw_opts.common, "output directory");
  sw->add_option("--seed", sw_opts.common.seed, "override train.seed");
  sw->add_option("--margins", margins, "comma-separated margins")->required();
  sw->add_option("--train", sw_opts.train_path, "training split")->required();
  sw->add_option("--validation", sw_opts.validation_path, "validation split")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : pc::kConfigError;
  }

  try {
    if (gen->parsed()) {
      pc::cmd_gen(gen_opts, std::cout);
    } else if (tr->parsed()) {
      pc::cmd_train(train_opts, std::cout);
    } else if (ev->parsed()) {
      if (!eval_raw && !eval_opts.source.net_path) throw persistnet::ConfigError("eval needs --net or --raw");
      eval_opts.task = pc::parse_task(task);
      pc::cmd_eval(eval_opts, std::cout);
    } else if (an->parsed()) {
      if (!an_raw && !an_opts.source.net_path) throw persistnet::ConfigError("analyze needs --net or --raw");
      an_opts.what = pc::parse_analysis(what);
      pc::cmd_analyze(an_opts, std::cout);
    } else if (sw->parsed()) {
      sw_opts.margins = parse_margins(margins);
      pc::cmd_sweep_margin(sw_opts, std::cout);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return pc::exit_code_for(e);
  }
  return pc::kOk;
}
