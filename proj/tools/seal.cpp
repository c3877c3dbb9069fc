// Command-line driver: gen, train, eval, verify-mi, plot, report.

#include <CLI11.hpp>

#include <deque>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "seal/alloc.hpp"
#include "seal/experiment.hpp"

namespace {

/// Flags that map onto config fields. Values stay strings until the command
/// runs so that only flags given on the command line override the config.
class ConfigFlags {
 public:
  explicit ConfigFlags(CLI::App* app) : app_(app), defaults_(seal::config_to_json(seal::ExperimentConfig{})) {
    app->add_option("--config", config_path_,
                    std::string("JSON config file (default: $") + seal::kConfigEnvVar + " when set)");
    app->add_option("--set", overrides_, "Override any config field, e.g. --set train.lr=0.02 (repeatable)");
  }

  void add(const std::string& flag, const std::string& section, const std::string& key, const std::string& help) {
    auto& slot = slots_.emplace_back(Slot{section, key, {}, nullptr});
    const seal::Json& d = defaults_.at(section).at(key);
    slot.option = app_->add_option(flag, slot.value, help)->default_str(d.is_string() ? d.get<std::string>() : d.dump());
  }

  seal::ExperimentConfig load() const {
    std::vector<std::string> all = overrides_;
    for (const Slot& s : slots_) {
      if (s.option->count() == 0) continue;
      const bool is_string = defaults_.at(s.section).at(s.key).is_string();
      all.push_back(s.section + "." + s.key + "=" + (is_string ? seal::Json(s.value).dump() : s.value));
    }
    return seal::load_config(config_path_.empty() ? std::nullopt : std::optional<std::string>(config_path_), all);
  }

 private:
  struct Slot {
    std::string section, key, value;
    CLI::Option* option;
  };

  CLI::App* app_;
  seal::Json defaults_;
  std::string config_path_;
  std::vector<std::string> overrides_;
  std::deque<Slot> slots_;  // stable addresses: CLI11 keeps pointers to `value`
};

}  // namespace

int main(int argc, char** argv) {
  seal::retain_freed_memory();
  CLI::App app{"Semi-supervised classification of graph instances inside a graph of graphs"};
  app.require_subcommand(1);
  app.get_formatter()->column_width(40);

  auto* gen = app.add_subcommand("gen", "Generate the synthetic hierarchical-graph dataset");
  ConfigFlags gen_flags(gen);
  gen_flags.add("--seed", "synth", "seed", "Generator seed");
  gen_flags.add("--dataset", "paths", "dataset", "Output dataset file");
  gen_flags.add("--out-dir", "paths", "out_dir", "Directory for stats.csv and the config copy");
  gen_flags.add("--skeleton", "synth", "skeleton_path", "Edge-list file for the hierarchy (empty: random)");
  gen_flags.add("--num-labeled", "synth", "num_labeled", "Labeled instances");
  gen_flags.add("--num-test", "synth", "num_test", "Test instances");

  auto* train = app.add_subcommand("train", "Train a model and write checkpoint and reports");
  ConfigFlags train_flags(train);
  train_flags.add("--dataset", "paths", "dataset", "Dataset file");
  train_flags.add("--out-dir", "paths", "out_dir", "Output directory");
  train_flags.add("--mode", "train", "mode", "seal, seal-ci, ic-only or hc-only");
  train_flags.add("--seed", "train", "seed", "Training seed");
  train_flags.add("--lambda", "train", "lambda", "Pseudo-labels added per iteration");
  train_flags.add("--iterations", "train", "max_iterations", "Iterations after the initial fit");
  train_flags.add("--epochs", "train", "epochs_per_iteration", "Epochs per iteration");
  train_flags.add("--finetune-epochs", "train", "finetune_epochs", "Epochs for later warm-started iterations (0: same)");
  train_flags.add("--lr", "train", "lr", "Adam learning rate");

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
  ConfigFlags eval_flags(eval);
  std::string checkpoint, eval_out, curve_out;
  eval->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  eval_flags.add("--dataset", "paths", "dataset", "Dataset file");
  eval_flags.add("--out-dir", "paths", "out_dir", "Directory for default outputs");
  eval_flags.add("--split", "eval", "split", "test, unlabeled or labeled");
  eval->add_option("--out", eval_out, "Metrics CSV (default: <out-dir>/eval_metrics.csv)");
  eval->add_option("--lambda-curve", curve_out, "Also write the false-prediction-rate curve to this CSV");

  auto* verify = app.add_subcommand("verify-mi", "Check the information-theoretic identities on random joints");
  ConfigFlags verify_flags(verify);
  std::string verify_out;
  verify_flags.add("--trials", "verify", "trials", "Random joint distributions");
  verify_flags.add("--sizes", "verify", "sizes", "Fixed alphabet sizes as JSON, e.g. [2,3,4] ([] draws from 2..5)");
  verify_flags.add("--seed", "verify", "seed", "Seed");
  verify_flags.add("--out-dir", "paths", "out_dir", "Directory for default outputs");
  verify->add_option("--out", verify_out, "Report CSV (default: <out-dir>/verify_mi.csv)");

  auto* plot = app.add_subcommand("plot", "Draw a CSV series as an SVG line chart");
  std::string plot_in, plot_kind, plot_out;
  plot->add_option("--in", plot_in, "Input CSV")->required();
  plot->add_option("--kind", plot_kind, "loss or lambda-curve")->required();
  plot->add_option("--out", plot_out, "Output SVG")->required();

  auto* report = app.add_subcommand("report", "Merge metric CSVs into one comparison table");
  std::vector<std::string> report_in;
  std::string report_out;
  report->add_option("--in", report_in, "Metric CSVs (mode,accuracy,macro_f1)")->required();
  report->add_option("--out", report_out, "Output CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (gen->parsed()) {
      seal::cmd_gen(gen_flags.load(), std::cout);
    } else if (train->parsed()) {
      seal::cmd_train(train_flags.load(), std::cerr);
    } else if (eval->parsed()) {
      const auto cfg = eval_flags.load();
      const std::string out = eval_out.empty() ? seal::join_path(cfg.paths.out_dir, "eval_metrics.csv") : eval_out;
      seal::cmd_eval(cfg, checkpoint, out, curve_out.empty() ? std::nullopt : std::optional<std::string>(curve_out),
                     std::cout);
    } else if (verify->parsed()) {
      const auto cfg = verify_flags.load();
      const std::string out = verify_out.empty() ? seal::join_path(cfg.paths.out_dir, "verify_mi.csv") : verify_out;
      if (!seal::cmd_verify_mi(cfg, out, std::cout)) return 1;
    } else if (plot->parsed()) {
      seal::cmd_plot(plot_in, seal::parse_plot_kind(plot_kind), plot_out);
    } else if (report->parsed()) {
      seal::cmd_report(report_in, report_out, std::cout);
    }
  } catch (const seal::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const seal::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
