#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "seal/canonical_json.hpp"
#include "seal/graph.hpp"
#include "seal/rng.hpp"
#include "seal/tensor.hpp"

namespace seal {

/// Layer widths and regularization for both classifiers.
struct ModelDims {
  std::size_t feature_dim = 2;   // d
  std::size_t gcn_hidden = 32;   // first IC GCN layer
  std::size_t node_dim = 4;      // v, second IC GCN layer
  std::size_t att_dim = 16;      // d_att
  std::size_t views = 4;         // r
  std::size_t head_hidden = 0;   // optional dense layer before the IC softmax (0 = none)
  std::size_t hc_hidden = 16;
  std::size_t num_classes = 7;   // c
  std::size_t hc_input_dim = 0;  // 0 means the instance embedding width m
  double dropout = 0.3;
  bool attention_penalty = false;
  double attention_penalty_weight = 0.15;

  std::size_t embedding_dim() const { return views * node_dim; }
  std::size_t hc_in() const { return hc_input_dim ? hc_input_dim : embedding_dim(); }

  friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

struct ICParams {
  Parameter W0, W1;    // GCN weights d x h0, h0 x v
  Parameter Ws1, Ws2;  // attention d_att x v, r x d_att
  Parameter W_hidden, b_hidden;  // present only when head_hidden > 0
  Parameter W_head, b_head;
};

struct HCParams {
  Parameter V0, V1;  // m x h1, h1 x c
};

struct DiscParams {
  Parameter W_DI;  // v x m
  Parameter W_DH;  // m x c
};

/// Glorot-uniform matrix.
inline Matrix glorot(std::size_t rows, std::size_t cols, Rng& rng) {
  Matrix m(rows, cols);
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  for (double& x : m.data) x = rng.uniform(-limit, limit);
  return m;
}

/// Per-column affine map applied to node features before the IC sees them.
/// Empty vectors mean the identity.
struct FeatureScaling {
  std::vector<double> shift;
  std::vector<double> scale;

  bool identity() const { return shift.empty(); }

  Matrix apply(const Matrix& x) const {
    if (identity()) return x;
    if (x.cols != shift.size()) {
      throw ShapeError("feature scaling: width " + std::to_string(x.cols) + " expected " + std::to_string(shift.size()));
    }
    Matrix out = x;
    for (std::size_t r = 0; r < out.rows; ++r)
      for (std::size_t c = 0; c < out.cols; ++c) out(r, c) = (out(r, c) - shift[c]) / scale[c];
    return out;
  }

  friend bool operator==(const FeatureScaling&, const FeatureScaling&) = default;
};

/// Z-scores every non-constant feature column over all nodes of all
/// instances; constant columns pass through unchanged.
inline FeatureScaling fit_feature_scaling(const HierarchicalGraph& h) {
  if (h.instances.empty()) return {};
  const std::size_t d = h.instances.front().feature_dim();
  std::vector<double> sum(d, 0.0), sq(d, 0.0);
  double count = 0.0;
  for (const GraphInstance& g : h.instances) {
    for (std::size_t r = 0; r < g.features.rows; ++r)
      for (std::size_t c = 0; c < d; ++c) {
        sum[c] += g.features(r, c);
        sq[c] += g.features(r, c) * g.features(r, c);
      }
    count += static_cast<double>(g.features.rows);
  }
  FeatureScaling s{std::vector<double>(d, 0.0), std::vector<double>(d, 1.0)};
  if (count == 0.0) return s;
  for (std::size_t c = 0; c < d; ++c) {
    const double mean = sum[c] / count;
    const double var = std::max(0.0, sq[c] / count - mean * mean);
    if (var > 1e-12) {
      s.shift[c] = mean;
      s.scale[c] = std::sqrt(var);
    }
  }
  return s;
}

/// All learnable state of IC, HC and the two discriminators, plus the fixed
/// input scaling they were trained with.
struct Model {
  ModelDims dims;
  FeatureScaling input;
  ICParams ic;
  HCParams hc;
  DiscParams disc;

  /// Glorot weights except the two output layers, which start at zero so the
  /// untrained model predicts the uniform distribution from both classifiers.
  static Model initialize(const ModelDims& dims, std::uint64_t seed) {
    Rng rng(mix_seed(seed, 0x3e1a));
    Model m;
    m.dims = dims;
    const std::size_t emb = dims.embedding_dim();
    m.ic.W0 = {"ic.W0", glorot(dims.feature_dim, dims.gcn_hidden, rng)};
    m.ic.W1 = {"ic.W1", glorot(dims.gcn_hidden, dims.node_dim, rng)};
    m.ic.Ws1 = {"ic.Ws1", glorot(dims.att_dim, dims.node_dim, rng)};
    m.ic.Ws2 = {"ic.Ws2", glorot(dims.views, dims.att_dim, rng)};
    std::size_t head_in = emb;
    if (dims.head_hidden > 0) {
      m.ic.W_hidden = {"ic.W_hidden", glorot(emb, dims.head_hidden, rng)};
      m.ic.b_hidden = {"ic.b_hidden", Matrix(1, dims.head_hidden)};
      head_in = dims.head_hidden;
    }
    m.ic.W_head = {"ic.W_head", Matrix(head_in, dims.num_classes)};
    m.ic.b_head = {"ic.b_head", Matrix(1, dims.num_classes)};
    m.hc.V0 = {"hc.V0", glorot(dims.hc_in(), dims.hc_hidden, rng)};
    m.hc.V1 = {"hc.V1", Matrix(dims.hc_hidden, dims.num_classes)};
    m.disc.W_DI = {"disc.W_DI", glorot(dims.node_dim, emb, rng)};
    m.disc.W_DH = {"disc.W_DH", glorot(emb, dims.num_classes, rng)};
    return m;
  }

  std::vector<Parameter*> ic_parameters() {
    std::vector<Parameter*> ps{&ic.W0, &ic.W1, &ic.Ws1, &ic.Ws2};
    if (dims.head_hidden > 0) {
      ps.push_back(&ic.W_hidden);
      ps.push_back(&ic.b_hidden);
    }
    ps.push_back(&ic.W_head);
    ps.push_back(&ic.b_head);
    return ps;
  }

  std::vector<Parameter*> parameters() {
    auto ps = ic_parameters();
    for (Parameter* p : {&hc.V0, &hc.V1, &disc.W_DI, &disc.W_DH}) ps.push_back(p);
    return ps;
  }

  void zero_grad() {
    for (Parameter* p : parameters()) p->zero_grad();
  }
};

/// Instance data that stays fixed during training: the normalized operator
/// and its first propagation of the scaled features.
struct PreparedInstance {
  std::shared_ptr<const SparseMatrix> adj;
  Matrix features;    // X
  Matrix propagated;  // Â X
};

inline PreparedInstance prepare_instance(const GraphInstance& g, const FeatureScaling& scaling = {}) {
  PreparedInstance p;
  p.adj = std::make_shared<const SparseMatrix>(normalized_adjacency_sparse(g.n, g.edges));
  p.features = scaling.apply(g.features);
  p.propagated = p.adj->multiply(p.features);
  return p;
}

inline std::vector<PreparedInstance> prepare_all(const HierarchicalGraph& h, const FeatureScaling& scaling = {}) {
  std::vector<PreparedInstance> out;
  out.reserve(h.size());
  for (const GraphInstance& g : h.instances) out.push_back(prepare_instance(g, scaling));
  return out;
}

enum class Activation { Identity, Relu };

/// activation(Â · H_in · W).
inline Var gcn_layer(std::shared_ptr<const SparseMatrix> adj, const Var& h_in, const Var& w, Activation act) {
  Var out = ops::spmm(std::move(adj), ops::matmul(h_in, w));
  return act == Activation::Relu ? ops::relu(out) : out;
}

struct AttentionPool {
  Var S;  // r x n, rows sum to one
  Var e;  // 1 x (r*v)
};

/// S = softmax(W_s2 tanh(W_s1 H^T)), e = flatten(S H).
inline AttentionPool attention_pool(const Var& H, const Var& Ws1, const Var& Ws2) {
  Var scores = ops::matmul(Ws2, ops::tanh(ops::matmul(Ws1, ops::transpose(H))));
  Var S = ops::softmax_rows(scores);
  Var pooled = ops::matmul(S, H);
  return {S, ops::reshape(pooled, 1, pooled.value().size())};
}

struct ICOutput {
  Var H;      // n x v node representations
  Var S;      // r x n attention
  Var e;      // 1 x m instance embedding
  Var probs;  // 1 x c
};

/// IC over one instance. The first layer uses the cached Â X, which equals
/// Â (X W0) by associativity. With `with_head` false the classification head
/// is skipped and `probs` is left empty.
inline ICOutput ic_forward(Tape& tape, const PreparedInstance& inst, Model& model, bool training, Rng& rng,
                           bool with_head = true) {
  if (inst.features.cols != model.dims.feature_dim) {
    throw ShapeError("ic_forward: instance feature width " + std::to_string(inst.features.cols) +
                     " does not match model input width " + std::to_string(model.dims.feature_dim));
  }
  Var ax = tape.constant(inst.propagated);
  Var h1 = ops::relu(ops::matmul(ax, tape.param(model.ic.W0)));
  Var H = gcn_layer(inst.adj, h1, tape.param(model.ic.W1), Activation::Identity);
  AttentionPool pool = attention_pool(H, tape.param(model.ic.Ws1), tape.param(model.ic.Ws2));
  if (!with_head) return {H, pool.S, pool.e, Var{}};
  Var z = pool.e;
  if (model.dims.head_hidden > 0) {
    z = ops::relu(ops::add_row(ops::matmul(z, tape.param(model.ic.W_hidden)), tape.param(model.ic.b_hidden)));
  }
  z = ops::dropout(z, model.dims.dropout, training, rng);
  Var logits = ops::add_row(ops::matmul(z, tape.param(model.ic.W_head)), tape.param(model.ic.b_head));
  return {H, pool.S, pool.e, ops::softmax_rows(logits)};
}

/// ||S S^T - I||_F^2, the optional attention-diversity penalty.
inline Var attention_penalty(const Var& S) {
  Tape& tape = *S.tape();
  Var gram = ops::matmul(S, ops::transpose(S));
  Var diff = ops::sub(gram, tape.constant(Matrix::identity(S.rows())));
  return ops::sum(ops::mul(diff, diff));
}

/// Several instances stacked node-wise: instance s owns stacked rows
/// [offsets[s], offsets[s+1]). The stack is stored as blocks of consecutive
/// instances, each with its own block-diagonal Â, so one forward pass touches
/// cache-sized operands.
struct PreparedBatch {
  struct Block {
    std::size_t first = 0;             // index into ids of the first instance
    std::vector<std::size_t> offsets;  // local row offsets, one more than instances in the block
    std::shared_ptr<const SparseMatrix> adj;
    Matrix propagated;  // stacked Â X
  };

  std::vector<std::size_t> ids;      // instance ids in stacking order
  std::vector<std::size_t> offsets;  // ids.size() + 1 entries
  std::vector<Block> blocks;

  std::size_t count() const { return ids.size(); }
  std::size_t nodes(std::size_t s) const { return offsets[s + 1] - offsets[s]; }
};

inline constexpr std::size_t kDefaultBlockNodes = 8192;

inline PreparedBatch prepare_batch(std::span<const PreparedInstance> prepared, std::vector<std::size_t> ids,
                                   std::size_t block_nodes = kDefaultBlockNodes) {
  PreparedBatch b;
  b.offsets.assign(1, 0);
  std::size_t width = 0;
  for (std::size_t id : ids) {
    if (id >= prepared.size()) throw ShapeError("prepare_batch: instance " + std::to_string(id) + " out of range");
    if (b.offsets.size() == 1) width = prepared[id].propagated.cols;
    if (prepared[id].propagated.cols != width) throw ShapeError("prepare_batch: instances differ in feature width");
    b.offsets.push_back(b.offsets.back() + prepared[id].adj->rows);
  }
  for (std::size_t first = 0; first < ids.size();) {
    std::size_t last = first + 1;
    while (last < ids.size() && b.offsets[last + 1] - b.offsets[first] <= block_nodes) ++last;
    const std::size_t total = b.offsets[last] - b.offsets[first];
    auto adj = std::make_shared<SparseMatrix>();
    adj->rows = adj->cols = total;
    PreparedBatch::Block block;
    block.first = first;
    block.offsets.assign(1, 0);
    block.propagated = Matrix(total, width);
    std::size_t base = 0;
    for (std::size_t s = first; s < last; ++s) {
      const SparseMatrix& a = *prepared[ids[s]].adj;
      const Matrix& ax = prepared[ids[s]].propagated;
      for (std::size_t i = 0; i < a.rows; ++i) {
        for (std::size_t p = a.row_ptr[i]; p < a.row_ptr[i + 1]; ++p) {
          adj->col_idx.push_back(base + a.col_idx[p]);
          adj->values.push_back(a.values[p]);
        }
        adj->row_ptr.push_back(adj->col_idx.size());
      }
      std::copy(ax.data.begin(), ax.data.end(), block.propagated.data.begin() + static_cast<std::ptrdiff_t>(base * width));
      base += a.rows;
      block.offsets.push_back(base);
    }
    block.adj = std::move(adj);
    b.blocks.push_back(std::move(block));
    first = last;
  }
  b.ids = std::move(ids);
  return b;
}

struct BatchICOutput {
  Var H;      // stacked node representations, total x v
  Var S;      // stacked attention, total x r (column k of block s is row k of that instance's S)
  Var E;      // count x m embeddings
  Var probs;  // count x c
};

/// IC over a whole batch; row s of E and probs matches ic_forward on
/// instance ids[s]. Dropout masks are drawn over the stacked embeddings, so
/// training-mode outputs differ from the per-instance path.
inline BatchICOutput ic_forward_batch(Tape& tape, const PreparedBatch& batch, Model& model, bool training, Rng& rng) {
  if (batch.count() == 0) throw ShapeError("ic_forward_batch: empty batch");
  std::vector<Var> Hs, Ss, Es;
  Var w0 = tape.param(model.ic.W0), w1 = tape.param(model.ic.W1);
  Var ws1t = ops::transpose(tape.param(model.ic.Ws1)), ws2t = ops::transpose(tape.param(model.ic.Ws2));
  for (const auto& block : batch.blocks) {
    if (block.propagated.cols != model.dims.feature_dim) {
      throw ShapeError("ic_forward_batch: instance feature width " + std::to_string(block.propagated.cols) +
                       " does not match model input width " + std::to_string(model.dims.feature_dim));
    }
    Var h1 = ops::relu(ops::matmul(tape.constant(block.propagated), w0));
    Var H = gcn_layer(block.adj, h1, w1, Activation::Identity);
    Var S = ops::segment_softmax(ops::matmul(ops::tanh(ops::matmul(H, ws1t)), ws2t), block.offsets);
    Es.push_back(ops::segment_pool(S, H, block.offsets));
    Hs.push_back(H);
    Ss.push_back(S);
  }
  auto join = [](std::vector<Var>& parts) { return parts.size() == 1 ? parts.front() : ops::concat_rows(parts); };
  Var E = join(Es);
  Var z = E;
  if (model.dims.head_hidden > 0) {
    z = ops::relu(ops::add_row(ops::matmul(z, tape.param(model.ic.W_hidden)), tape.param(model.ic.b_hidden)));
  }
  z = ops::dropout(z, model.dims.dropout, training, rng);
  Var logits = ops::add_row(ops::matmul(z, tape.param(model.ic.W_head)), tape.param(model.ic.b_head));
  return {join(Hs), join(Ss), E, ops::softmax_rows(logits)};
}

/// Mean over the batch of ||S_s S_sᵀ - I||_F^2.
inline Var attention_penalty_batch(const Var& S, const std::vector<std::size_t>& offsets) {
  Tape& tape = *S.tape();
  const std::size_t r = S.cols();
  Var gram = ops::segment_pool(S, S, offsets);  // row s: flatten(S_s S_sᵀ)
  Matrix eye(1, r * r);
  for (std::size_t k = 0; k < r; ++k) eye(0, k * r + k) = -1.0;
  Var diff = ops::add_row(gram, tape.constant(std::move(eye)));
  return ops::scale(ops::sum(ops::mul(diff, diff)), 1.0 / static_cast<double>(offsets.size() - 1));
}

/// Γ = softmax(Â_h relu(Â_h E V0) V1), one row per instance.
inline Var hc_forward(std::shared_ptr<const SparseMatrix> hier_adj, const Var& E, Model& model) {
  if (E.rows() != hier_adj->rows) {
    throw ShapeError("hc_forward: " + std::to_string(E.rows()) + " embeddings for a hierarchy of " +
                     std::to_string(hier_adj->rows) + " instances");
  }
  Tape& tape = *E.tape();
  Var hidden = gcn_layer(hier_adj, E, tape.param(model.hc.V0), Activation::Relu);
  return ops::softmax_rows(gcn_layer(hier_adj, hidden, tape.param(model.hc.V1), Activation::Identity));
}

inline std::shared_ptr<const SparseMatrix> hier_operator(const HierarchicalGraph& h) {
  return std::make_shared<const SparseMatrix>(normalized_adjacency_sparse(h.size(), h.hier_edges));
}

/// Raw bilinear score x^T W y.
inline double bilinear(std::span<const double> x, const Matrix& W, std::span<const double> y) {
  if (x.size() != W.rows || y.size() != W.cols) {
    throw ShapeError("bilinear: vectors of width " + std::to_string(x.size()) + " and " + std::to_string(y.size()) +
                     " against " + W.shape_string());
  }
  double s = 0.0;
  for (std::size_t i = 0; i < W.rows; ++i)
    for (std::size_t j = 0; j < W.cols; ++j) s += x[i] * W(i, j) * y[j];
  return s;
}

/// σ(h^T W_DI e): probability that node rep h belongs to the instance embedded as e.
inline double disc_instance(std::span<const double> h, std::span<const double> e, const Matrix& W_DI) {
  return ops::sigmoid_value(bilinear(h, W_DI, e));
}

/// σ(e^T W_DH γ).
inline double disc_hier(std::span<const double> e, std::span<const double> gamma, const Matrix& W_DH) {
  return ops::sigmoid_value(bilinear(e, W_DH, gamma));
}

// ---- checkpoint ------------------------------------------------------------

inline constexpr int kCheckpointVersion = 1;

inline Json matrix_to_json(const Matrix& m) {
  return {{"shape", {m.rows, m.cols}}, {"data", m.data}};
}

inline Matrix matrix_from_json(const Json& j, const std::string& path) {
  if (!j.is_object() || !j.contains("shape") || !j.contains("data")) throw ParseError(path + ": expected {shape, data}");
  const Json& shape = j["shape"];
  if (!shape.is_array() || shape.size() != 2 || !shape[0].is_number_integer() || !shape[1].is_number_integer())
    throw ParseError(path + ".shape: expected [rows, cols]");
  Matrix m(shape[0].get<std::size_t>(), shape[1].get<std::size_t>());
  const Json& data = j["data"];
  if (!data.is_array() || data.size() != m.size()) throw ParseError(path + ".data: expected " + std::to_string(m.size()) + " numbers");
  for (std::size_t k = 0; k < m.size(); ++k) {
    if (!data[k].is_number()) throw ParseError(path + ".data[" + std::to_string(k) + "]: expected a number");
    m.data[k] = data[k].get<double>();
  }
  return m;
}

inline Json dims_to_json(const ModelDims& d) {
  return {{"feature_dim", d.feature_dim}, {"gcn_hidden", d.gcn_hidden}, {"node_dim", d.node_dim},
          {"att_dim", d.att_dim},         {"views", d.views},           {"head_hidden", d.head_hidden},
          {"hc_hidden", d.hc_hidden},     {"num_classes", d.num_classes}, {"hc_input_dim", d.hc_input_dim},
          {"dropout", d.dropout},         {"attention_penalty", d.attention_penalty},
          {"attention_penalty_weight", d.attention_penalty_weight}};
}

inline ModelDims dims_from_json(const Json& j) {
  try {
    ModelDims d;
    d.feature_dim = j.at("feature_dim").get<std::size_t>();
    d.gcn_hidden = j.at("gcn_hidden").get<std::size_t>();
    d.node_dim = j.at("node_dim").get<std::size_t>();
    d.att_dim = j.at("att_dim").get<std::size_t>();
    d.views = j.at("views").get<std::size_t>();
    d.head_hidden = j.at("head_hidden").get<std::size_t>();
    d.hc_hidden = j.at("hc_hidden").get<std::size_t>();
    d.num_classes = j.at("num_classes").get<std::size_t>();
    d.hc_input_dim = j.at("hc_input_dim").get<std::size_t>();
    d.dropout = j.at("dropout").get<double>();
    d.attention_penalty = j.at("attention_penalty").get<bool>();
    d.attention_penalty_weight = j.at("attention_penalty_weight").get<double>();
    return d;
  } catch (const Json::exception& e) {
    throw ParseError(std::string("checkpoint.dims: ") + e.what());
  }
}

inline Json model_to_json(Model& m, const std::string& mode) {
  Json params = Json::object();
  for (Parameter* p : m.parameters()) params[p->name] = matrix_to_json(p->value);
  return {{"format", "seal-checkpoint"},
          {"version", kCheckpointVersion},
          {"mode", mode},
          {"dims", dims_to_json(m.dims)},
          {"input_scaling", {{"shift", m.input.shift}, {"scale", m.input.scale}}},
          {"params", std::move(params)}};
}

struct Checkpoint {
  Model model;
  std::string mode;
};

inline Checkpoint model_from_json(const Json& j) {
  if (!j.is_object() || j.value("format", "") != "seal-checkpoint") throw ParseError("checkpoint: not a seal checkpoint");
  if (j.value("version", -1) != kCheckpointVersion) {
    throw VersionError("checkpoint.version: unsupported version (expected " + std::to_string(kCheckpointVersion) + ")");
  }
  Checkpoint c;
  c.mode = j.value("mode", "");
  if (!j.contains("dims") || !j.contains("params") || !j.contains("input_scaling")) {
    throw ParseError("checkpoint: missing dims, params or input_scaling");
  }
  c.model = Model::initialize(dims_from_json(j.at("dims")), 0);
  try {
    const Json& sc = j.at("input_scaling");
    c.model.input.shift = sc.at("shift").get<std::vector<double>>();
    c.model.input.scale = sc.at("scale").get<std::vector<double>>();
  } catch (const Json::exception& e) {
    throw ParseError(std::string("checkpoint.input_scaling: ") + e.what());
  }
  if (c.model.input.shift.size() != c.model.input.scale.size() ||
      (!c.model.input.identity() && c.model.input.shift.size() != c.model.dims.feature_dim)) {
    throw ParseError("checkpoint.input_scaling: shift and scale must both have feature_dim entries");
  }
  for (double s : c.model.input.scale)
    if (!(s > 0.0)) throw ParseError("checkpoint.input_scaling.scale: entries must be positive");
  const Json& params = j.at("params");
  for (Parameter* p : c.model.parameters()) {
    if (!params.contains(p->name)) throw ParseError("checkpoint.params." + p->name + ": missing");
    Matrix v = matrix_from_json(params[p->name], "checkpoint.params." + p->name);
    if (!v.same_shape(p->value)) {
      throw ParseError("checkpoint.params." + p->name + ": shape " + v.shape_string() + " expected " +
                       p->value.shape_string());
    }
    p->value = std::move(v);
    p->zero_grad();
  }
  return c;
}

}  // namespace seal
