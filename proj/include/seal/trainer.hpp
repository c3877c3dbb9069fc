#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "seal/canonical_json.hpp"
#include "seal/error.hpp"
#include "seal/graph.hpp"
#include "seal/mi.hpp"
#include "seal/nets.hpp"
#include "seal/optim.hpp"

namespace seal {

enum class TrainMode { Seal, SealCi, IcOnly, HcOnly };

inline std::string to_string(TrainMode m) {
  switch (m) {
    case TrainMode::Seal: return "seal";
    case TrainMode::SealCi: return "seal-ci";
    case TrainMode::IcOnly: return "ic-only";
    case TrainMode::HcOnly: return "hc-only";
  }
  return "?";
}

inline TrainMode parse_train_mode(const std::string& s) {
  if (s == "seal") return TrainMode::Seal;
  if (s == "seal-ci") return TrainMode::SealCi;
  if (s == "ic-only") return TrainMode::IcOnly;
  if (s == "hc-only") return TrainMode::HcOnly;
  throw ConfigError("unknown training mode '" + s + "' (expected seal, seal-ci, ic-only or hc-only)");
}

struct TrainConfig {
  std::size_t lambda = 1;                // pseudo-labels added per iteration
  std::size_t max_iterations = 10;       // SEAL-CI iterations after the initial fit (0 = plain SEAL)
  std::size_t epochs_per_iteration = 200;
  std::size_t finetune_epochs = 0;       // epochs for iterations t >= 1 under warm start; 0 = epochs_per_iteration
  double lr = 0.01;
  double alpha_weight = 0.5;             // α in ξ = α (I(G;E) + I(E;Γ))
  double mi_coefficient = 0.1;           // β_mi in ζ - β_mi ξ
  std::uint64_t seed = 1;
  bool warm_start = true;
  bool freeze_pseudo_labels = false;
  bool standardize_features = true;      // z-score node feature columns before the IC
  std::size_t early_stop_window = 20;
  double early_stop_tol = 1e-5;
  MIOptions mi;
  ModelDims dims;                         // feature_dim and num_classes are taken from the dataset

  void check() const {
    if (lambda < 1) throw ConfigError("lambda must be >= 1");
    if (lr <= 0) throw ConfigError("lr must be positive");
    if (alpha_weight < 0) throw ConfigError("alpha_weight must be non-negative");
    if (mi_coefficient < 0) throw ConfigError("mi_coefficient must be non-negative");
    if (dims.dropout < 0 || dims.dropout >= 1) throw ConfigError("dropout must be in [0,1)");
    if (mi.negatives_per_positive < 1) throw ConfigError("negatives_per_positive must be >= 1");
  }
};

struct Selection {
  std::size_t id = 0;
  int label = 0;
  double confidence = 0.0;

  friend bool operator==(const Selection&, const Selection&) = default;
};

struct IterationRecord {
  std::size_t iteration = 0;
  double zeta_orig = 0.0;      // ζ on the original labeled set
  double zeta_enlarged = 0.0;  // ζ on the set the iteration trained on
  double mi_inst = 0.0;
  double mi_hier = 0.0;
  double loss = 0.0;
  double accuracy = 0.0;       // on the test split
  double macro_f1 = 0.0;
  std::size_t epochs = 0;
  std::vector<Selection> selected;  // committed for the next iteration
};

struct TrainReport {
  TrainMode mode = TrainMode::Seal;
  std::vector<IterationRecord> iterations;
  std::vector<double> epoch_losses;  // training objective, every epoch of every iteration
};

/// Per-instance outputs of one inference pass (no dropout).
struct Predictions {
  Matrix ic_probs;  // N x c (empty for hc-only)
  Matrix gamma;     // N x c (empty for ic-only)
  Matrix embeddings;
  double mi_inst = 0.0;
  double mi_hier = 0.0;
};

inline std::size_t argmax_row(const Matrix& m, std::size_t r) {
  const auto row = m.row(r);
  return static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
}

// ---- objective --------------------------------------------------------------

/// ζ = (1/L) Σ [CE(y, ic_i) + CE(y, γ_i)] over (ids, labels).
inline Var supervised_risk(const Var& ic_probs, const Var& gamma, std::span<const int> labels) {
  return ops::add(ops::cross_entropy(ic_probs, labels), ops::cross_entropy(gamma, labels));
}

inline double supervised_risk(const Matrix& ic_probs, const Matrix& gamma, std::span<const std::size_t> ids,
                              std::span<const int> labels) {
  if (ids.empty()) throw Error("supervised_risk: empty labeled set");
  double total = 0.0;
  for (std::size_t k = 0; k < ids.size(); ++k) {
    total -= std::log(std::max(ic_probs(ids[k], labels[k]), ops::kProbFloor));
    total -= std::log(std::max(gamma(ids[k], labels[k]), ops::kProbFloor));
  }
  return total / static_cast<double>(ids.size());
}

/// ζ - β_mi ξ.
inline double total_loss(double zeta, double xi, double mi_coefficient) { return zeta - mi_coefficient * xi; }

inline Var total_loss(const Var& zeta, const Var& xi, double mi_coefficient) {
  return ops::sub(zeta, ops::scale(xi, mi_coefficient));
}

// ---- metrics ----------------------------------------------------------------

struct EvalResult {
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  std::vector<std::vector<std::size_t>> confusion;  // [truth][predicted]
};

/// Accuracy and Macro-F1 of argmax predictions over `ids`. Classes absent from
/// both truth and prediction contribute F1 = 0.
inline EvalResult evaluate_predictions(const Matrix& probs, const HierarchicalGraph& h, std::span<const std::size_t> ids) {
  if (ids.empty()) throw Error("evaluate: empty split");
  const auto c = static_cast<std::size_t>(h.num_classes);
  EvalResult r;
  r.confusion.assign(c, std::vector<std::size_t>(c, 0));
  std::size_t correct = 0;
  for (std::size_t id : ids) {
    const auto& label = h.instances.at(id).label;
    if (!label) throw Error("evaluate: instance " + std::to_string(id) + " has no ground-truth label");
    const std::size_t pred = argmax_row(probs, id);
    ++r.confusion[*label][pred];
    if (pred == static_cast<std::size_t>(*label)) ++correct;
  }
  r.accuracy = static_cast<double>(correct) / static_cast<double>(ids.size());
  double f1_sum = 0.0;
  for (std::size_t k = 0; k < c; ++k) {
    std::size_t tp = r.confusion[k][k], fp = 0, fn = 0;
    for (std::size_t o = 0; o < c; ++o) {
      if (o == k) continue;
      fp += r.confusion[o][k];
      fn += r.confusion[k][o];
    }
    const std::size_t denom = 2 * tp + fp + fn;
    f1_sum += denom ? 2.0 * static_cast<double>(tp) / static_cast<double>(denom) : 0.0;
  }
  r.macro_f1 = c ? f1_sum / static_cast<double>(c) : 0.0;
  return r;
}

/// Spearman rank correlation with average ranks for ties; 0 when either side is constant.
inline double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error("spearman: length mismatch");
  auto ranks = [](std::span<const double> v) {
    std::vector<std::size_t> order(v.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < order.size();) {
      std::size_t j = i;
      while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
      const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
      for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
      i = j + 1;
    }
    return r;
  };
  const auto rx = ranks(x), ry = ranks(y);
  const double n = static_cast<double>(x.size());
  if (n < 2) return 0.0;
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0 || syy == 0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

// ---- selection --------------------------------------------------------------

/// Cautious selection: an unlabeled instance is a candidate only when IC and
/// HC agree on the argmax class; its confidence is the smaller of the two max
/// probabilities. Returns the k most confident candidates, ties by ascending id.
inline std::vector<Selection> cautious_select(const Matrix& ic_probs, const Matrix& gamma,
                                              std::span<const std::size_t> unlabeled_ids, std::size_t k) {
  std::vector<Selection> pool;
  for (std::size_t id : unlabeled_ids) {
    const std::size_t a = argmax_row(ic_probs, id);
    const std::size_t b = argmax_row(gamma, id);
    if (a != b) continue;
    pool.push_back({id, static_cast<int>(a), std::min(ic_probs(id, a), gamma(id, b))});
  }
  std::sort(pool.begin(), pool.end(), [](const Selection& x, const Selection& y) {
    if (x.confidence != y.confidence) return x.confidence > y.confidence;
    return x.id < y.id;
  });
  if (pool.size() > k) pool.resize(k);
  return pool;
}

struct CurvePoint {
  std::size_t lambda = 0;
  double false_rate = 0.0;
};

/// For each λ, the error rate among the λ most confident IC predictions on
/// `pool_ids` (all must carry ground truth). λ beyond the pool is clipped.
inline std::vector<CurvePoint> false_prediction_curve(const Matrix& ic_probs, const HierarchicalGraph& h,
                                                      std::span<const std::size_t> pool_ids,
                                                      std::span<const std::size_t> lambda_grid) {
  struct Scored {
    std::size_t id;
    double confidence;
    bool wrong;
  };
  std::vector<Scored> scored;
  for (std::size_t id : pool_ids) {
    const auto& label = h.instances.at(id).label;
    if (!label) throw Error("false_prediction_curve: instance " + std::to_string(id) + " has no ground truth");
    const std::size_t pred = argmax_row(ic_probs, id);
    scored.push_back({id, ic_probs(id, pred), pred != static_cast<std::size_t>(*label)});
  }
  std::sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) {
    if (a.confidence != b.confidence) return a.confidence > b.confidence;
    return a.id < b.id;
  });
  std::vector<std::size_t> wrong_prefix(scored.size() + 1, 0);
  for (std::size_t i = 0; i < scored.size(); ++i) wrong_prefix[i + 1] = wrong_prefix[i] + (scored[i].wrong ? 1 : 0);
  std::vector<CurvePoint> out;
  for (std::size_t lambda : lambda_grid) {
    const std::size_t top = std::min(lambda, scored.size());
    out.push_back({lambda, top ? static_cast<double>(wrong_prefix[top]) / static_cast<double>(top) : 0.0});
  }
  return out;
}

/// Unlabeled instances that carry a ground-truth label: the pool cautious
/// selection draws pseudo-labels from.
inline std::vector<std::size_t> unlabeled_with_truth(const HierarchicalGraph& h) {
  std::vector<std::size_t> ids;
  for (std::size_t id : h.unlabeled_ids)
    if (h.instances[id].label) ids.push_back(id);
  return ids;
}

inline std::string curve_csv(const std::vector<CurvePoint>& curve) {
  std::string out = "lambda,false_rate\n";
  char buf[64];
  for (const auto& p : curve) {
    std::snprintf(buf, sizeof buf, "%zu,%.10g\n", p.lambda, p.false_rate);
    out += buf;
  }
  return out;
}

// ---- training ---------------------------------------------------------------

/// Holds the dataset-derived state shared by every epoch of one run.
class Trainer {
 public:
  /// `scaling` fixes the input transform (e.g. from a checkpoint); otherwise
  /// it is fitted on `h` when cfg.standardize_features is set.
  Trainer(const HierarchicalGraph& h, TrainConfig cfg, TrainMode mode, std::optional<FeatureScaling> scaling = {})
      : h_(h), cfg_(std::move(cfg)), mode_(mode),
        scaling_(scaling ? *scaling : (cfg_.standardize_features ? fit_feature_scaling(h) : FeatureScaling{})),
        prepared_(prepare_all(h, scaling_)), hier_adj_(hier_operator(h)), neighbors_(hier_neighbors(h)),
        all_(prepare_batch(prepared_, all_ids(h.size()))) {
    cfg_.check();
    if (h.size() < 2) throw ConfigError("dataset needs at least two instances");
    if (h.num_classes < 1) throw ConfigError("dataset has no classes");
    cfg_.dims.feature_dim = h.instances.front().feature_dim();
    cfg_.dims.num_classes = static_cast<std::size_t>(h.num_classes);
    cfg_.dims.hc_input_dim = mode == TrainMode::HcOnly ? cfg_.dims.feature_dim : 0;
    if (mode == TrainMode::HcOnly) pooled_features_ = mean_pooled_features();
  }

  const TrainConfig& config() const { return cfg_; }
  const ModelDims& dims() const { return cfg_.dims; }

  Model initial_model() const {
    Model m = Model::initialize(cfg_.dims, cfg_.seed);
    m.input = scaling_;
    return m;
  }

  const FeatureScaling& scaling() const { return scaling_; }

  /// Inference pass over the whole hierarchy. MI values use a fixed negative
  /// sample so repeated calls agree.
  Predictions predict(Model& model) const {
    check_model(model);
    Tape tape(false);
    Rng rng(mix_seed(cfg_.seed, 0xe7a1));
    Predictions out;
    if (mode_ == TrainMode::HcOnly) {
      Var E = tape.constant(pooled_features_);
      out.gamma = hc_forward(hier_adj_, E, model).value();
      out.embeddings = pooled_features_;
      return out;
    }
    BatchICOutput o = ic_forward_batch(tape, all_, model, false, rng);
    out.ic_probs = o.probs.value();
    out.embeddings = o.E.value();
    if (mode_ == TrainMode::IcOnly) return out;
    Var gamma = hc_forward(hier_adj_, o.E, model);
    out.gamma = gamma.value();
    out.mi_inst = instance_mi_batch(o.H, o.E, all_.offsets, tape.param(model.disc.W_DI), rng, cfg_.mi).item();
    out.mi_hier = hier_mi(o.E, gamma, tape.param(model.disc.W_DH), neighbors_, rng, cfg_.mi).item();
    return out;
  }

  /// Matrix used for final predictions: Γ, or the IC head for ic-only.
  const Matrix& decision_probs(const Predictions& p) const {
    return mode_ == TrainMode::IcOnly ? p.ic_probs : p.gamma;
  }

  struct EpochResult {
    double loss = 0.0;
    double zeta = 0.0;
  };

  /// One full-batch gradient step on the objective for the given labeled set.
  EpochResult epoch(Model& model, Adam& adam, std::span<const std::size_t> ids, std::span<const int> labels,
                    Rng& rng) const {
    model.zero_grad();
    Tape tape;
    Var loss, zeta;
    if (mode_ == TrainMode::IcOnly) {
      if (!labeled_ || labeled_->ids.size() != ids.size() || !std::equal(ids.begin(), ids.end(), labeled_->ids.begin()))
        labeled_ = prepare_batch(prepared_, {ids.begin(), ids.end()});
      zeta = ops::cross_entropy(ic_forward_batch(tape, *labeled_, model, true, rng).probs, labels);
      loss = zeta;
    } else if (mode_ == TrainMode::HcOnly) {
      Var gamma = hc_forward(hier_adj_, tape.constant(pooled_features_), model);
      zeta = ops::cross_entropy(ops::gather_rows(gamma, {ids.begin(), ids.end()}), labels);
      loss = zeta;
    } else {
      loss = seal_objective(tape, model, ids, labels, rng, &zeta);
    }
    tape.backward(loss);
    auto params = model.parameters();
    adam.step(params);
    return {loss.item(), zeta.item()};
  }

  /// ζ - β_mi α (I(G;E) + I(E;Γ)) [+ attention penalty], built on `tape`.
  Var seal_objective(Tape& tape, Model& model, std::span<const std::size_t> ids, std::span<const int> labels, Rng& rng,
                     Var* zeta_out = nullptr, bool training = true) const {
    BatchICOutput o = ic_forward_batch(tape, all_, model, training, rng);
    Var gamma = hc_forward(hier_adj_, o.E, model);
    std::vector<std::size_t> rows(ids.begin(), ids.end());
    Var zeta = supervised_risk(ops::gather_rows(o.probs, rows), ops::gather_rows(gamma, rows), labels);
    Var mi_i = instance_mi_batch(o.H, o.E, all_.offsets, tape.param(model.disc.W_DI), rng, cfg_.mi);
    Var mi_h = hier_mi(o.E, gamma, tape.param(model.disc.W_DH), neighbors_, rng, cfg_.mi);
    Var loss = total_loss(zeta, hgmi(mi_i, mi_h, cfg_.alpha_weight), cfg_.mi_coefficient);
    if (model.dims.attention_penalty) {
      loss = ops::add(loss, ops::scale(attention_penalty_batch(o.S, all_.offsets), model.dims.attention_penalty_weight));
    }
    if (zeta_out) *zeta_out = zeta;
    return loss;
  }

  /// Runs up to `epochs` steps with the early-stop rule; returns epochs run.
  std::size_t fit(Model& model, Adam& adam, std::span<const std::size_t> ids, std::span<const int> labels, Rng& rng,
                  std::size_t epochs, std::vector<double>& loss_log) const {
    std::vector<double> zetas;
    for (std::size_t e = 0; e < epochs; ++e) {
      EpochResult r = epoch(model, adam, ids, labels, rng);
      loss_log.push_back(r.loss);
      zetas.push_back(r.zeta);
      const std::size_t w = cfg_.early_stop_window;
      if (w > 0 && zetas.size() > w) {
        const double before = zetas[zetas.size() - 1 - w];
        const double best = *std::min_element(zetas.end() - static_cast<std::ptrdiff_t>(w), zetas.end());
        if (before - best < cfg_.early_stop_tol) return e + 1;
      }
    }
    return epochs;
  }

  /// Cautious-iteration training. max_iterations = 0 is plain SEAL.
  TrainReport run(Model& model, const std::function<void(const IterationRecord&)>& progress = {}) const {
    check_model(model);
    if (h_.labeled_ids.empty()) throw ConfigError("training needs at least one labeled instance");
    for (std::size_t id : h_.labeled_ids)
      if (!h_.instances[id].label) throw ConfigError("labeled instance " + std::to_string(id) + " has no label");
    TrainReport report;
    report.mode = mode_;
    std::vector<int> base_labels;
    for (std::size_t id : h_.labeled_ids) base_labels.push_back(*h_.instances[id].label);

    const bool iterate = mode_ == TrainMode::SealCi;
    const std::size_t unlabeled = h_.unlabeled_ids.size();
    Adam adam(AdamConfig{cfg_.lr});
    Rng rng(mix_seed(cfg_.seed, 0x7a1d));
    std::vector<std::size_t> ids = h_.labeled_ids;
    std::vector<int> labels = base_labels;
    std::map<std::size_t, Selection> committed;

    for (std::size_t t = 0;; ++t) {
      if (t > 0 && !cfg_.warm_start) {
        model = initial_model();
        adam = Adam(AdamConfig{cfg_.lr});
      }
      const std::size_t epochs =
          (t > 0 && cfg_.warm_start && cfg_.finetune_epochs > 0) ? cfg_.finetune_epochs : cfg_.epochs_per_iteration;
      IterationRecord rec;
      rec.iteration = t;
      rec.epochs = fit(model, adam, ids, labels, rng, epochs, report.epoch_losses);

      const Predictions pred = predict(model);
      fill_metrics(rec, pred, ids, labels);

      const std::size_t k = t * cfg_.lambda;
      const bool last = !iterate || t >= cfg_.max_iterations || (t + 1) * cfg_.lambda > unlabeled;
      if (iterate && mode_ != TrainMode::IcOnly) {
        rec.selected = select(pred, k, committed);
        ids = h_.labeled_ids;
        labels = base_labels;
        for (const Selection& s : rec.selected) {
          ids.push_back(s.id);
          labels.push_back(s.label);
        }
      }
      report.iterations.push_back(std::move(rec));
      if (progress) progress(report.iterations.back());
      if (last) break;
    }
    return report;
  }

  EvalResult evaluate(Model& model, std::span<const std::size_t> split) const {
    return evaluate_predictions(decision_probs(predict(model)), h_, split);
  }

 private:
  static std::vector<std::size_t> all_ids(std::size_t count) {
    std::vector<std::size_t> ids(count);
    std::iota(ids.begin(), ids.end(), 0);
    return ids;
  }

  void check_model(const Model& model) const {
    if (model.input != scaling_) throw Error("model was trained with a different input scaling");
    if (model.dims.feature_dim != cfg_.dims.feature_dim || model.dims.num_classes != cfg_.dims.num_classes ||
        model.dims.hc_in() != cfg_.dims.hc_in()) {
      throw ShapeError("model dimensions do not match the dataset (feature_dim " + std::to_string(model.dims.feature_dim) +
                       ", classes " + std::to_string(model.dims.num_classes) + ")");
    }
  }

  Matrix mean_pooled_features() const {
    const std::size_t d = cfg_.dims.feature_dim;
    Matrix out(h_.size(), d);
    for (std::size_t i = 0; i < h_.size(); ++i) {
      const Matrix& x = prepared_[i].features;
      for (std::size_t r = 0; r < x.rows; ++r)
        for (std::size_t c = 0; c < d; ++c) out(i, c) += x(r, c) / static_cast<double>(x.rows);
    }
    return out;
  }

  std::vector<Selection> select(const Predictions& pred, std::size_t k, std::map<std::size_t, Selection>& committed) const {
    if (!cfg_.freeze_pseudo_labels) return cautious_select(pred.ic_probs, pred.gamma, h_.unlabeled_ids, k);
    std::vector<std::size_t> remaining;
    for (std::size_t id : h_.unlabeled_ids)
      if (!committed.count(id)) remaining.push_back(id);
    const std::size_t extra = k > committed.size() ? k - committed.size() : 0;
    for (const Selection& s : cautious_select(pred.ic_probs, pred.gamma, remaining, extra)) committed.emplace(s.id, s);
    std::vector<Selection> all;
    for (const auto& [id, s] : committed) all.push_back(s);
    std::stable_sort(all.begin(), all.end(), [](const Selection& a, const Selection& b) {
      if (a.confidence != b.confidence) return a.confidence > b.confidence;
      return a.id < b.id;
    });
    return all;
  }

  void fill_metrics(IterationRecord& rec, const Predictions& pred, std::span<const std::size_t> ids,
                    std::span<const int> labels) const {
    std::vector<int> base;
    for (std::size_t id : h_.labeled_ids) base.push_back(*h_.instances[id].label);
    auto risk = [&](std::span<const std::size_t> s, std::span<const int> y) {
      double total = 0.0;
      for (std::size_t k = 0; k < s.size(); ++k) {
        if (!pred.ic_probs.empty()) total -= std::log(std::max(pred.ic_probs(s[k], y[k]), ops::kProbFloor));
        if (!pred.gamma.empty()) total -= std::log(std::max(pred.gamma(s[k], y[k]), ops::kProbFloor));
      }
      return total / static_cast<double>(s.size());
    };
    rec.zeta_orig = risk(h_.labeled_ids, base);
    rec.zeta_enlarged = risk(ids, labels);
    rec.mi_inst = pred.mi_inst;
    rec.mi_hier = pred.mi_hier;
    const bool with_mi = mode_ == TrainMode::Seal || mode_ == TrainMode::SealCi;
    rec.loss = with_mi ? total_loss(rec.zeta_enlarged, hgmi(pred.mi_inst, pred.mi_hier, cfg_.alpha_weight),
                                    cfg_.mi_coefficient)
                       : rec.zeta_enlarged;
    if (!h_.test_ids.empty()) {
      const EvalResult ev = evaluate_predictions(decision_probs(pred), h_, h_.test_ids);
      rec.accuracy = ev.accuracy;
      rec.macro_f1 = ev.macro_f1;
    }
  }

  const HierarchicalGraph& h_;
  TrainConfig cfg_;
  TrainMode mode_;
  FeatureScaling scaling_;
  std::vector<PreparedInstance> prepared_;
  std::shared_ptr<const SparseMatrix> hier_adj_;
  std::vector<std::vector<std::size_t>> neighbors_;
  PreparedBatch all_;
  mutable std::optional<PreparedBatch> labeled_;
  Matrix pooled_features_;
};

struct TrainResult {
  Model model;
  TrainReport report;
};

/// Trains in the given mode; seal is seal-ci with max_iterations = 0.
inline TrainResult train(const HierarchicalGraph& h, TrainConfig cfg, TrainMode mode,
                         const std::function<void(const IterationRecord&)>& progress = {}) {
  if (mode == TrainMode::Seal) cfg.max_iterations = 0;
  Trainer trainer(h, cfg, mode);
  TrainResult r{trainer.initial_model(), {}};
  r.report = trainer.run(r.model, progress);
  return r;
}

inline TrainResult train_seal(const HierarchicalGraph& h, const TrainConfig& cfg) { return train(h, cfg, TrainMode::Seal); }

inline TrainResult train_seal_ci(const HierarchicalGraph& h, const TrainConfig& cfg) {
  return train(h, cfg, TrainMode::SealCi);
}

// ---- report files -----------------------------------------------------------

inline std::string report_csv(const TrainReport& r) {
  std::string out = "iteration,zeta_orig,zeta_enlarged,mi_inst,mi_hier,loss,acc,macro_f1,n_pseudo\n";
  char buf[320];
  for (const auto& it : r.iterations) {
    std::snprintf(buf, sizeof buf, "%zu,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%zu\n", it.iteration, it.zeta_orig,
                  it.zeta_enlarged, it.mi_inst, it.mi_hier, it.loss, it.accuracy, it.macro_f1, it.selected.size());
    out += buf;
  }
  return out;
}

inline std::string epoch_loss_csv(const TrainReport& r) {
  std::string out = "epoch,loss\n";
  char buf[64];
  for (std::size_t e = 0; e < r.epoch_losses.size(); ++e) {
    std::snprintf(buf, sizeof buf, "%zu,%.12g\n", e, r.epoch_losses[e]);
    out += buf;
  }
  return out;
}

inline Json selection_log(const TrainReport& r) {
  Json iters = Json::array();
  for (const auto& it : r.iterations) {
    Json sel = Json::array();
    for (const Selection& s : it.selected) sel.push_back({{"id", s.id}, {"label", s.label}, {"confidence", s.confidence}});
    iters.push_back({{"iteration", it.iteration}, {"selected", std::move(sel)}});
  }
  return {{"mode", to_string(r.mode)}, {"iterations", std::move(iters)}};
}

}  // namespace seal
