#pragma once

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "seal/canonical_json.hpp"
#include "seal/dataset_io.hpp"
#include "seal/error.hpp"
#include "seal/info_oracle.hpp"
#include "seal/svg_plot.hpp"
#include "seal/synthgen.hpp"
#include "seal/trainer.hpp"

namespace seal {

/// Name of the environment variable holding the default config file path.
inline constexpr const char* kConfigEnvVar = "SEAL_CONFIG";

struct VerifyConfig {
  std::size_t trials = 1000;
  std::vector<std::size_t> sizes;  // empty: draw each alphabet size from [2, 5]
  std::uint64_t seed = 1;
};

struct EvalConfig {
  std::string split = "test";
  std::vector<std::size_t> lambda_grid{50, 100, 150, 200, 250, 300, 350, 400, 450, 500,
                                       550, 600, 650, 700, 750, 800, 850, 900, 950, 1000};
};

struct PathsConfig {
  std::string dataset = "out/dataset.json";
  std::string out_dir = "out";
};

/// Every setting of every command. Loaded from one JSON document with the
/// sections synth, train, verify, eval and paths; absent keys keep their
/// defaults and unknown keys are rejected.
struct ExperimentConfig {
  SynthConfig synth;
  TrainConfig train;
  std::string mode = "seal-ci";
  VerifyConfig verify;
  EvalConfig eval;
  PathsConfig paths;
};

namespace detail {

inline std::string hier_pairs_name(HierPairs p) { return p == HierPairs::All ? "all" : "neighborhood"; }

inline HierPairs parse_hier_pairs(const std::string& s) {
  if (s == "neighborhood") return HierPairs::Neighborhood;
  if (s == "all") return HierPairs::All;
  throw ConfigError("train.hier_pairs: expected 'neighborhood' or 'all', got '" + s + "'");
}

/// Proxy so string-coded enums can be visited like plain fields.
struct HierPairsField {
  HierPairs* target;
};

template <typename V>
void visit_config(ExperimentConfig& c, V&& v) {
  SynthConfig& s = c.synth;
  v("synth", "seed", s.seed);
  v("synth", "n_range", s.n_range);
  v("synth", "p_range", s.p_range);
  v("synth", "er_p_range", s.er_p_range);
  v("synth", "branch_range", s.branch_range);
  v("synth", "removal_range", s.removal_range);
  v("synth", "class_counts", s.class_counts);
  v("synth", "skeleton_path", s.skeleton_path);
  v("synth", "skeleton_mean_degree", s.skeleton_mean_degree);
  v("synth", "skeleton_homophily", s.skeleton_homophily);
  v("synth", "feature_spec", s.feature_spec);
  v("synth", "num_labeled", s.num_labeled);
  v("synth", "num_test", s.num_test);
  v("synth", "ring_degree", s.family.ring_degree);
  v("synth", "barbell_clique_fraction", s.family.barbell_clique_fraction);
  v("synth", "ba_attachment_scale", s.family.ba_attachment_scale);

  TrainConfig& t = c.train;
  v("train", "mode", c.mode);
  v("train", "lambda", t.lambda);
  v("train", "max_iterations", t.max_iterations);
  v("train", "epochs_per_iteration", t.epochs_per_iteration);
  v("train", "finetune_epochs", t.finetune_epochs);
  v("train", "lr", t.lr);
  v("train", "alpha_weight", t.alpha_weight);
  v("train", "mi_coefficient", t.mi_coefficient);
  v("train", "seed", t.seed);
  v("train", "warm_start", t.warm_start);
  v("train", "freeze_pseudo_labels", t.freeze_pseudo_labels);
  v("train", "standardize_features", t.standardize_features);
  v("train", "early_stop_window", t.early_stop_window);
  v("train", "early_stop_tol", t.early_stop_tol);
  HierPairsField hp{&t.mi.hier_pairs};
  v("train", "hier_pairs", hp);
  v("train", "negatives_per_positive", t.mi.negatives_per_positive);
  v("train", "gcn_hidden", t.dims.gcn_hidden);
  v("train", "node_dim", t.dims.node_dim);
  v("train", "att_dim", t.dims.att_dim);
  v("train", "views", t.dims.views);
  v("train", "head_hidden", t.dims.head_hidden);
  v("train", "hc_hidden", t.dims.hc_hidden);
  v("train", "dropout", t.dims.dropout);
  v("train", "attention_penalty", t.dims.attention_penalty);
  v("train", "attention_penalty_weight", t.dims.attention_penalty_weight);

  v("verify", "trials", c.verify.trials);
  v("verify", "sizes", c.verify.sizes);
  v("verify", "seed", c.verify.seed);

  v("eval", "split", c.eval.split);
  v("eval", "lambda_grid", c.eval.lambda_grid);

  v("paths", "dataset", c.paths.dataset);
  v("paths", "out_dir", c.paths.out_dir);
}

template <typename T>
Json field_to_json(const T& value) {
  return Json(value);
}

inline Json field_to_json(const HierPairsField& f) { return hier_pairs_name(*f.target); }

template <typename T>
void field_from_json(const Json& j, T& out, const std::string& path) {
  try {
    if constexpr (std::is_same_v<T, bool>) {
      if (!j.is_boolean()) throw ConfigError(path + ": expected true or false");
    } else if constexpr (std::is_integral_v<T> && std::is_unsigned_v<T>) {
      if (!j.is_number_unsigned()) throw ConfigError(path + ": expected a non-negative integer");
    } else if constexpr (std::is_integral_v<T>) {
      if (!j.is_number_integer()) throw ConfigError(path + ": expected an integer");
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!j.is_number()) throw ConfigError(path + ": expected a number");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!j.is_string()) throw ConfigError(path + ": expected a string");
    }
    out = j.get<T>();
  } catch (const Json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

inline void field_from_json(const Json& j, HierPairsField& f, const std::string& path) {
  if (!j.is_string()) throw ConfigError(path + ": expected a string");
  *f.target = parse_hier_pairs(j.get<std::string>());
}

}  // namespace detail

inline Json config_to_json(const ExperimentConfig& cfg) {
  ExperimentConfig copy = cfg;
  Json j = Json::object();
  detail::visit_config(copy, [&](const char* section, const char* key, auto& field) {
    j[section][key] = detail::field_to_json(field);
  });
  return j;
}

/// Applies the keys present in `j` on top of `cfg`.
inline void apply_config_json(ExperimentConfig& cfg, const Json& j) {
  if (!j.is_object()) throw ConfigError("config: expected a JSON object");
  std::map<std::string, std::map<std::string, bool>> known;
  detail::visit_config(cfg, [&](const char* section, const char* key, auto&) { known[section][key] = true; });
  for (const auto& [section, body] : j.items()) {
    if (!known.count(section)) throw ConfigError("config: unknown section '" + section + "'");
    if (!body.is_object()) throw ConfigError("config." + section + ": expected an object");
    for (const auto& [key, value] : body.items()) {
      if (!known[section].count(key)) throw ConfigError("config." + section + ": unknown key '" + key + "'");
    }
  }
  detail::visit_config(cfg, [&](const char* section, const char* key, auto& field) {
    if (j.contains(section) && j[section].contains(key)) {
      detail::field_from_json(j[section][key], field, std::string("config.") + section + "." + key);
    }
  });
}

/// Applies one `section.key=value` override; the value is read as JSON and
/// falls back to a plain string.
inline void apply_override(ExperimentConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  const auto dot = assignment.find('.');
  if (eq == std::string::npos || dot == std::string::npos || dot > eq) {
    throw ConfigError("override '" + assignment + "': expected section.key=value");
  }
  const std::string section = assignment.substr(0, dot);
  const std::string key = assignment.substr(dot + 1, eq - dot - 1);
  const std::string text = assignment.substr(eq + 1);
  Json value = Json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  apply_config_json(cfg, Json{{section, Json{{key, value}}}});
}

inline void validate_config(const ExperimentConfig& cfg) {
  cfg.synth.check();
  cfg.train.check();
  parse_train_mode(cfg.mode);
  if (!cfg.verify.sizes.empty()) {
    if (cfg.verify.sizes.size() != 3) throw ConfigError("verify.sizes: expected three alphabet sizes");
    for (std::size_t s : cfg.verify.sizes)
      if (s < 1) throw ConfigError("verify.sizes: alphabet sizes must be >= 1");
  }
  if (cfg.eval.split != "test" && cfg.eval.split != "unlabeled" && cfg.eval.split != "labeled") {
    throw ConfigError("eval.split: expected test, unlabeled or labeled");
  }
}

/// Defaults, then the config file (explicit path, else $SEAL_CONFIG when set),
/// then `section.key=value` overrides in order.
inline ExperimentConfig load_config(const std::optional<std::string>& path, const std::vector<std::string>& overrides) {
  ExperimentConfig cfg;
  std::optional<std::string> file = path;
  if (!file) {
    if (const char* env = std::getenv(kConfigEnvVar); env != nullptr && *env != '\0') file = env;
  }
  if (file) {
    Json j;
    try {
      j = parse_json_text(read_file(*file), *file);
    } catch (const ParseError& e) {
      throw ConfigError(e.what());
    }
    apply_config_json(cfg, j);
  }
  for (const auto& o : overrides) apply_override(cfg, o);
  validate_config(cfg);
  return cfg;
}

// ---- commands ---------------------------------------------------------------

inline std::string join_path(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

inline void ensure_parent_dir(const std::string& path) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
}

inline void write_output(const std::string& path, const std::string& content) {
  ensure_parent_dir(path);
  write_file_atomic(path, content);
}

inline void save_config_copy(const ExperimentConfig& cfg, const std::string& command) {
  write_output(join_path(cfg.paths.out_dir, command + ".config.json"), canonical_dump(config_to_json(cfg)));
}

inline std::string fmt_pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", 100.0 * v);
  return buf;
}

/// Generates the synthetic dataset and its per-class statistics.
inline HierarchicalGraph cmd_gen(const ExperimentConfig& cfg, std::ostream& log) {
  HierarchicalGraph h = synthesize_dataset(cfg.synth);
  write_output(cfg.paths.dataset, dataset_to_string(h));
  const auto stats = instance_stats(h);
  write_output(join_path(cfg.paths.out_dir, "stats.csv"), stats_csv(stats));
  save_config_copy(cfg, "gen");
  log << "class  generator        count  mean_nodes  mean_edges  density%\n";
  for (const auto& s : stats) {
    const std::string name(kGeneratorNames[static_cast<std::size_t>(s.class_index)]);
    char line[128];
    std::snprintf(line, sizeof line, "%5d  %-15s %5zu  %10.1f  %10.1f  %8.2f\n", s.class_index, name.c_str(), s.count,
                  s.mean_nodes, s.mean_edges, 100.0 * s.mean_density);
    log << line;
  }
  log << h.size() << " instances, " << h.hier_edges.size() << " hierarchy edges, " << h.labeled_ids.size()
      << " labeled / " << h.unlabeled_ids.size() << " unlabeled / " << h.test_ids.size() << " test\n";
  return h;
}

inline std::string metrics_csv(const std::string& mode, const EvalResult& r) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "%s,%.10g,%.10g\n", mode.c_str(), r.accuracy, r.macro_f1);
  return std::string("mode,accuracy,macro_f1\n") + buf;
}

inline const std::vector<std::size_t>& split_ids(const HierarchicalGraph& h, const std::string& split) {
  if (split == "test") return h.test_ids;
  if (split == "unlabeled") return h.unlabeled_ids;
  if (split == "labeled") return h.labeled_ids;
  throw ConfigError("unknown split '" + split + "'");
}

inline HierarchicalGraph load_dataset_for_command(const std::string& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("dataset file '" + path + "' does not exist");
  return load_dataset(path);
}

struct TrainOutputs {
  TrainResult result;
  EvalResult test;
};

/// Trains in cfg.mode and writes checkpoint.json, report.csv, epochs.csv,
/// selection.json, metrics.csv and train.config.json into out_dir.
inline TrainOutputs cmd_train(const ExperimentConfig& cfg, std::ostream& log) {
  const TrainMode mode = parse_train_mode(cfg.mode);
  HierarchicalGraph h = load_dataset_for_command(cfg.paths.dataset);
  if (mode == TrainMode::IcOnly) h.hier_edges.clear();
  if (h.test_ids.empty()) throw ConfigError("dataset has an empty test split");
  TrainOutputs out{train(h, cfg.train, mode,
                         [&](const IterationRecord& r) {
                           log << "iteration " << r.iteration << ": epochs " << r.epochs << ", zeta "
                               << r.zeta_orig << ", test accuracy " << fmt_pct(r.accuracy) << "%, pseudo-labels "
                               << r.selected.size() << "\n";
                         }),
                   {}};
  Trainer evaluator(h, cfg.train, mode, out.result.model.input);
  out.test = evaluator.evaluate(out.result.model, h.test_ids);
  const std::string& dir = cfg.paths.out_dir;
  write_output(join_path(dir, "checkpoint.json"), canonical_dump(model_to_json(out.result.model, cfg.mode)));
  write_output(join_path(dir, "report.csv"), report_csv(out.result.report));
  write_output(join_path(dir, "epochs.csv"), epoch_loss_csv(out.result.report));
  write_output(join_path(dir, "selection.json"), canonical_dump(selection_log(out.result.report)));
  write_output(join_path(dir, "metrics.csv"), metrics_csv(cfg.mode, out.test));
  save_config_copy(cfg, "train");
  log << cfg.mode << ": test accuracy " << fmt_pct(out.test.accuracy) << "%, macro-F1 " << fmt_pct(out.test.macro_f1)
      << "%\n";
  return out;
}

struct EvalOutputs {
  EvalResult metrics;
  std::vector<CurvePoint> curve;
};

/// Evaluates a checkpoint on cfg.paths.dataset. Writes `metrics_path` and,
/// when given, the false-prediction-rate curve to `curve_path`.
inline EvalOutputs cmd_eval(const ExperimentConfig& cfg, const std::string& checkpoint_path,
                            const std::string& metrics_path, const std::optional<std::string>& curve_path,
                            std::ostream& log) {
  if (!std::filesystem::exists(checkpoint_path)) {
    throw ConfigError("checkpoint file '" + checkpoint_path + "' does not exist");
  }
  Checkpoint ck = model_from_json(parse_json_text(read_file(checkpoint_path), checkpoint_path));
  HierarchicalGraph h = load_dataset_for_command(cfg.paths.dataset);
  const TrainMode mode = parse_train_mode(ck.mode);
  if (mode == TrainMode::IcOnly) h.hier_edges.clear();
  if (ck.model.dims.num_classes != static_cast<std::size_t>(h.num_classes)) {
    throw ConfigError("checkpoint has " + std::to_string(ck.model.dims.num_classes) + " classes but dataset has " +
                      std::to_string(h.num_classes));
  }
  if (!h.instances.empty() && ck.model.dims.feature_dim != h.instances.front().feature_dim()) {
    throw ConfigError("checkpoint expects " + std::to_string(ck.model.dims.feature_dim) +
                      " node features but dataset has " + std::to_string(h.instances.front().feature_dim()));
  }
  TrainConfig tc = cfg.train;
  tc.dims = ck.model.dims;
  Trainer trainer(h, tc, mode, ck.model.input);
  const Predictions pred = trainer.predict(ck.model);
  EvalOutputs out;
  const auto& ids = split_ids(h, cfg.eval.split);
  if (ids.empty()) throw ConfigError("split '" + cfg.eval.split + "' is empty");
  out.metrics = evaluate_predictions(trainer.decision_probs(pred), h, ids);
  write_output(metrics_path, metrics_csv(ck.mode, out.metrics));
  if (curve_path) {
    if (pred.ic_probs.empty()) throw ConfigError("lambda curve needs instance-classifier outputs; " + ck.mode + " has none");
    const auto pool = unlabeled_with_truth(h);
    if (pool.empty()) throw ConfigError("lambda curve needs unlabeled instances with ground-truth labels");
    out.curve = false_prediction_curve(pred.ic_probs, h, pool, cfg.eval.lambda_grid);
    write_output(*curve_path, curve_csv(out.curve));
  }
  log << ck.mode << " on " << cfg.eval.split << ": accuracy " << fmt_pct(out.metrics.accuracy) << "%, macro-F1 "
      << fmt_pct(out.metrics.macro_f1) << "%\n";
  return out;
}

/// Runs the exact-MI checks and writes the report; returns whether all passed.
inline bool cmd_verify_mi(const ExperimentConfig& cfg, const std::string& report_path, std::ostream& log) {
  info::VerifyOptions opt;
  opt.trials = cfg.verify.trials;
  if (!cfg.verify.sizes.empty()) opt.sizes = info::Sizes{cfg.verify.sizes[0], cfg.verify.sizes[1], cfg.verify.sizes[2]};
  Rng rng(cfg.verify.seed);
  if (opt.trials == 0) {
    write_output(report_path, "check,trials,max_violation,pass\n");
    log << "0 trials: nothing to check\n";
    return true;
  }
  const info::IdentityReport report = info::verify_identities(opt, rng);
  write_output(report_path, info::report_csv(report));
  for (const auto& c : report.checks) {
    char line[160];
    std::snprintf(line, sizeof line, "%-16s trials %6zu  max violation %.3e  %s\n", c.check.c_str(), c.trials,
                  c.max_violation, c.pass() ? "ok" : "FAILED");
    log << line;
  }
  return report.all_pass();
}

enum class PlotKind { Loss, LambdaCurve };

inline PlotKind parse_plot_kind(const std::string& s) {
  if (s == "loss") return PlotKind::Loss;
  if (s == "lambda-curve") return PlotKind::LambdaCurve;
  throw ConfigError("unknown plot kind '" + s + "' (expected loss or lambda-curve)");
}

/// Loss plots take the first column as x and the `loss` column as y; λ
/// curves read `lambda,false_rate`.
inline std::string plot_from_csv(const std::string& csv_text, PlotKind kind) {
  CsvTable t = parse_csv(csv_text);
  if (t.rows.empty()) throw ConfigError("plot: CSV has no data rows");
  if (kind == PlotKind::Loss) {
    const auto xs = t.numbers(0);
    const auto ys = t.numbers(t.column("loss"));
    return line_chart_svg(xs, ys, {"Training loss", t.header[0], "loss"});
  }
  const auto xs = t.numbers(t.column("lambda"));
  const auto ys = t.numbers(t.column("false_rate"));
  return line_chart_svg(xs, ys, {"False prediction rate of the most confident predictions", "lambda",
                                 "false prediction rate"});
}

inline void cmd_plot(const std::string& csv_path, PlotKind kind, const std::string& svg_path) {
  if (!std::filesystem::exists(csv_path)) throw ConfigError("CSV file '" + csv_path + "' does not exist");
  write_output(svg_path, plot_from_csv(read_file(csv_path), kind));
}

/// Merges metric CSVs (`mode,accuracy,macro_f1`) into one table with the
/// mean and sample standard deviation per mode, modes in first-seen order.
inline std::string merge_metrics(const std::vector<std::string>& csv_texts) {
  struct Acc {
    std::vector<double> acc, f1;
  };
  std::vector<std::string> order;
  std::map<std::string, Acc> by_mode;
  for (const auto& text : csv_texts) {
    CsvTable t = parse_csv(text);
    const std::size_t cm = t.column("mode");
    const auto acc = t.numbers(t.column("accuracy"));
    const auto f1 = t.numbers(t.column("macro_f1"));
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
      const std::string& m = t.rows[r][cm];
      if (!by_mode.count(m)) order.push_back(m);
      by_mode[m].acc.push_back(acc[r]);
      by_mode[m].f1.push_back(f1[r]);
    }
  }
  if (order.empty()) throw ConfigError("report: no metric rows in the inputs");
  auto mean_sd = [](const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::pair{m, v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0};
  };
  std::string out = "mode,runs,accuracy_mean,accuracy_std,macro_f1_mean,macro_f1_std\n";
  for (const auto& m : order) {
    const auto [am, as] = mean_sd(by_mode[m].acc);
    const auto [fm, fs] = mean_sd(by_mode[m].f1);
    char buf[256];
    std::snprintf(buf, sizeof buf, "%s,%zu,%.10g,%.10g,%.10g,%.10g\n", m.c_str(), by_mode[m].acc.size(), am, as, fm, fs);
    out += buf;
  }
  return out;
}

inline std::string cmd_report(const std::vector<std::string>& inputs, const std::string& out_path, std::ostream& log) {
  std::vector<std::string> texts;
  for (const auto& p : inputs) {
    if (!std::filesystem::exists(p)) throw ConfigError("metrics file '" + p + "' does not exist");
    texts.push_back(read_file(p));
  }
  const std::string table = merge_metrics(texts);
  write_output(out_path, table);
  log << table;
  return table;
}

}  // namespace seal
