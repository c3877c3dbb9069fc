#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "seal/error.hpp"
#include "seal/rng.hpp"

namespace seal {

/// Dense row-major real matrix. Vectors are 1 x k, scalars 1 x 1.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> init) {
    Matrix m;
    m.rows = init.size();
    m.cols = m.rows ? init.begin()->size() : 0;
    for (const auto& row : init) {
      if (row.size() != m.cols) throw ShapeError("from_rows: ragged initializer");
      m.data.insert(m.data.end(), row.begin(), row.end());
    }
    return m;
  }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  static Matrix scalar(double v) { return Matrix(1, 1, v); }

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  std::size_t size() const { return data.size(); }
  bool empty() const { return data.empty(); }
  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }

  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

  std::string shape_string() const { return std::to_string(rows) + "x" + std::to_string(cols); }

  friend bool operator==(const Matrix& a, const Matrix& b) {
    return a.rows == b.rows && a.cols == b.cols && a.data == b.data;
  }
};

inline Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols != b.rows) {
    throw ShapeError("matmul: shapes " + a.shape_string() + " and " + b.shape_string() + " incompatible");
  }
  Matrix out(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i) {
    double* o = out.data.data() + i * out.cols;
    for (std::size_t k = 0; k < a.cols; ++k) {
      const double av = a(i, k);
      if (av == 0.0) continue;
      const double* br = b.data.data() + k * b.cols;
      for (std::size_t j = 0; j < b.cols; ++j) o[j] += av * br[j];
    }
  }
  return out;
}

inline Matrix transpose(const Matrix& a) {
  Matrix out(a.cols, a.rows);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < a.cols; ++j) out(j, i) = a(i, j);
  return out;
}

/// Compressed sparse row matrix; used for normalized adjacency operators.
struct SparseMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::size_t> row_ptr{0};
  std::vector<std::size_t> col_idx;
  std::vector<double> values;

  static SparseMatrix from_dense(const Matrix& m) {
    SparseMatrix s;
    s.rows = m.rows;
    s.cols = m.cols;
    s.row_ptr.assign(1, 0);
    for (std::size_t i = 0; i < m.rows; ++i) {
      for (std::size_t j = 0; j < m.cols; ++j) {
        if (m(i, j) != 0.0) {
          s.col_idx.push_back(j);
          s.values.push_back(m(i, j));
        }
      }
      s.row_ptr.push_back(s.col_idx.size());
    }
    return s;
  }

  Matrix to_dense() const {
    Matrix m(rows, cols);
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t p = row_ptr[i]; p < row_ptr[i + 1]; ++p) m(i, col_idx[p]) = values[p];
    return m;
  }

  Matrix multiply(const Matrix& b) const {
    if (cols != b.rows) {
      throw ShapeError("spmm: shapes " + std::to_string(rows) + "x" + std::to_string(cols) + " and " +
                       b.shape_string() + " incompatible");
    }
    Matrix out(rows, b.cols);
    for (std::size_t i = 0; i < rows; ++i) {
      double* o = out.data.data() + i * out.cols;
      for (std::size_t p = row_ptr[i]; p < row_ptr[i + 1]; ++p) {
        const double v = values[p];
        const double* br = b.data.data() + col_idx[p] * b.cols;
        for (std::size_t j = 0; j < b.cols; ++j) o[j] += v * br[j];
      }
    }
    return out;
  }
};

/// A learnable weight matrix together with its accumulated gradient.
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;

  Parameter() = default;
  Parameter(std::string n, Matrix v) : name(std::move(n)), value(std::move(v)), grad(value.rows, value.cols) {}

  void zero_grad() {
    grad = Matrix(value.rows, value.cols);
  }
};

class Tape;

/// Handle to a value recorded on a Tape.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  const Matrix& value() const;
  const Matrix& grad() const;
  std::size_t rows() const { return value().rows; }
  std::size_t cols() const { return value().cols; }
  double item() const;
  bool requires_grad() const;
  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Records operations in creation order (which is a topological order) and
/// runs reverse-mode accumulation over them.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, const Matrix& out_value, const Matrix& out_grad)>;

  Tape() = default;
  /// With gradients disabled, parameters enter as constants and no backward
  /// rules are kept; used for inference passes.
  explicit Tape(bool grad_enabled) : grad_enabled_(grad_enabled) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value) { return push(std::move(value), false, nullptr, nullptr); }

  /// Leaf that receives a gradient but is not bound to a Parameter.
  Var variable(Matrix value) { return push(std::move(value), true, nullptr, nullptr); }

  /// Leaf bound to `p`; backward() adds its gradient into p.grad.
  /// Repeated calls within one tape return the same node.
  Var param(Parameter& p) {
    if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) return Var(this, it->second);
    Var v = push(p.value, grad_enabled_, nullptr, grad_enabled_ ? &p : nullptr);
    param_nodes_.emplace(&p, v.id());
    return v;
  }

  /// Records an op result. `fn` is kept only when some input requires grad.
  Var record(Matrix value, std::initializer_list<Var> inputs, BackwardFn fn) {
    bool any = false;
    for (const Var& in : inputs) any = any || in.requires_grad();
    return push(std::move(value), any, any ? std::move(fn) : nullptr, nullptr);
  }

  Var record(Matrix value, std::span<const Var> inputs, BackwardFn fn) {
    bool any = false;
    for (const Var& in : inputs) any = any || in.requires_grad();
    return push(std::move(value), any, any ? std::move(fn) : nullptr, nullptr);
  }

  void backward(Var loss) {
    if (loss.tape() != this) throw Error("backward: loss is not on this tape");
    if (loss.value().size() != 1) {
      throw Error("backward: loss must be scalar, got shape " + loss.value().shape_string());
    }
    if (!nodes_[loss.id()].requires_grad) return;
    grad_ref(loss.id()).data[0] += 1.0;
    for (std::size_t id = loss.id() + 1; id-- > 0;) {
      Node& node = nodes_[id];
      if (!node.requires_grad || node.grad.empty()) continue;
      if (node.backward) node.backward(*this, node.value, node.grad);
      if (node.param != nullptr) {
        Matrix& pg = node.param->grad;
        if (!pg.same_shape(node.grad)) pg = Matrix(node.grad.rows, node.grad.cols);
        for (std::size_t k = 0; k < pg.size(); ++k) pg.data[k] += node.grad.data[k];
      }
    }
  }

  const Matrix& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

  /// Gradient accumulated so far for node `id` (zeros when none reached it).
  const Matrix& grad(std::size_t id) const {
    const Node& n = nodes_[id];
    if (n.grad.empty()) {
      static thread_local Matrix zeros;
      zeros = Matrix(n.value.rows, n.value.cols);
      return zeros;
    }
    return n.grad;
  }

  /// Mutable gradient buffer for backward rules; no-op target for constants.
  Matrix* accumulator(std::size_t id) {
    if (!nodes_[id].requires_grad) return nullptr;
    return &grad_ref(id);
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    BackwardFn backward;
    Parameter* param = nullptr;
  };

  Var push(Matrix value, bool requires_grad, BackwardFn fn, Parameter* p) {
    nodes_.push_back(Node{std::move(value), Matrix{}, requires_grad, std::move(fn), p});
    return Var(this, nodes_.size() - 1);
  }

  Matrix& grad_ref(std::size_t id) {
    Node& n = nodes_[id];
    if (n.grad.empty() && n.value.size() > 0) n.grad = Matrix(n.value.rows, n.value.cols);
    return n.grad;
  }

  std::vector<Node> nodes_;
  bool grad_enabled_ = true;
  std::unordered_map<const Parameter*, std::size_t> param_nodes_;
};

inline const Matrix& Var::value() const { return tape_->value(id_); }
inline const Matrix& Var::grad() const { return tape_->grad(id_); }
inline bool Var::requires_grad() const { return tape_ && tape_->requires_grad(id_); }
inline double Var::item() const {
  if (value().size() != 1) throw ShapeError("item: expected scalar, got " + value().shape_string());
  return value().data[0];
}

/// Differentiable operations. Each records one node on its inputs' tape.
namespace ops {

namespace detail {

inline Tape& tape_of(const Var& a) {
  if (a.tape() == nullptr) throw Error("op on a Var without tape");
  return *a.tape();
}

inline void require_same_shape(const char* op, const Var& a, const Var& b) {
  if (!a.value().same_shape(b.value())) {
    throw ShapeError(std::string(op) + ": shapes " + a.value().shape_string() + " and " +
                     b.value().shape_string() + " differ");
  }
}

inline void add_into(Matrix* acc, const Matrix& g) {
  if (acc == nullptr) return;
  for (std::size_t k = 0; k < g.size(); ++k) acc->data[k] += g.data[k];
}

/// Elementwise op; `dfdx(x, y)` receives the input and the output value.
template <typename F, typename D>
Var unary(const Var& a, F f, D dfdx) {
  const Matrix& x = a.value();
  Matrix out(x.rows, x.cols);
  for (std::size_t k = 0; k < x.size(); ++k) out.data[k] = f(x.data[k]);
  const std::size_t ia = a.id();
  return tape_of(a).record(std::move(out), {a}, [ia, dfdx](Tape& t, const Matrix& y, const Matrix& g) {
    Matrix* acc = t.accumulator(ia);
    if (!acc) return;
    const Matrix& x = t.value(ia);
    for (std::size_t k = 0; k < g.size(); ++k) acc->data[k] += g.data[k] * dfdx(x.data[k], y.data[k]);
  });
}

}  // namespace detail

inline double softplus_value(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

inline double sigmoid_value(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline Var matmul(const Var& a, const Var& b) {
  Matrix out = seal::matmul(a.value(), b.value());
  const std::size_t ia = a.id(), ib = b.id();
  return detail::tape_of(a).record(std::move(out), {a, b}, [ia, ib](Tape& t, const Matrix&, const Matrix& g) {
    const Matrix& A = t.value(ia);
    const Matrix& B = t.value(ib);
    if (Matrix* dA = t.accumulator(ia)) {
      // dA += G B^T
      for (std::size_t i = 0; i < A.rows; ++i) {
        const double* gr = g.data.data() + i * g.cols;
        for (std::size_t k = 0; k < A.cols; ++k) {
          const double* br = B.data.data() + k * B.cols;
          double s = 0.0;
          for (std::size_t j = 0; j < g.cols; ++j) s += gr[j] * br[j];
          (*dA)(i, k) += s;
        }
      }
    }
    if (Matrix* dB = t.accumulator(ib)) {
      // dB += A^T G
      for (std::size_t i = 0; i < A.rows; ++i) {
        const double* gr = g.data.data() + i * g.cols;
        for (std::size_t k = 0; k < A.cols; ++k) {
          const double av = A(i, k);
          if (av == 0.0) continue;
          double* dr = dB->data.data() + k * dB->cols;
          for (std::size_t j = 0; j < g.cols; ++j) dr[j] += av * gr[j];
        }
      }
    }
  });
}

/// Constant sparse operator applied on the left: S * a.
inline Var spmm(std::shared_ptr<const SparseMatrix> s, const Var& a) {
  Matrix out = s->multiply(a.value());
  const std::size_t ia = a.id();
  return detail::tape_of(a).record(std::move(out), {a}, [ia, s](Tape& t, const Matrix&, const Matrix& g) {
    Matrix* dA = t.accumulator(ia);
    if (!dA) return;
    for (std::size_t i = 0; i < s->rows; ++i) {
      const double* gr = g.data.data() + i * g.cols;
      for (std::size_t p = s->row_ptr[i]; p < s->row_ptr[i + 1]; ++p) {
        double* dr = dA->data.data() + s->col_idx[p] * dA->cols;
        const double v = s->values[p];
        for (std::size_t j = 0; j < g.cols; ++j) dr[j] += v * gr[j];
      }
    }
  });
}

inline Var transpose(const Var& a) {
  const std::size_t ia = a.id();
  return detail::tape_of(a).record(seal::transpose(a.value()), {a}, [ia](Tape& t, const Matrix&, const Matrix& g) {
    Matrix* acc = t.accumulator(ia);
    if (!acc) return;
    for (std::size_t i = 0; i < g.rows; ++i)
      for (std::size_t j = 0; j < g.cols; ++j) (*acc)(j, i) += g(i, j);
  });
}

inline Var add(const Var& a, const Var& b) {
  detail::require_same_shape("add", a, b);
  Matrix out = a.value();
  for (std::size_t k = 0; k < out.size(); ++k) out.data[k] += b.value().data[k];
  const std::size_t ia = a.id(), ib = b.id();
  return detail::tape_of(a).record(std::move(out), {a, b}, [ia, ib](Tape& t, const Matrix&, const Matrix& g) {
    detail::add_into(t.accumulator(ia), g);
    detail::add_into(t.accumulator(ib), g);
  });
}

inline Var sub(const Var& a, const Var& b) {
  detail::require_same_shape("sub", a, b);
  Matrix out = a.value();
  for (std::size_t k = 0; k < out.size(); ++k) out.data[k] -= b.value().data[k];
  const std::size_t ia = a.id(), ib = b.id();
  return detail::tape_of(a).record(std::move(out), {a, b}, [ia, ib](Tape& t, const Matrix&, const Matrix& g) {
    detail::add_into(t.accumulator(ia), g);
    if (Matrix* acc = t.accumulator(ib))
      for (std::size_t k = 0; k < g.size(); ++k) acc->data[k] -= g.data[k];
  });
}

/// Elementwise product.
inline Var mul(const Var& a, const Var& b) {
  detail::require_same_shape("mul", a, b);
  Matrix out = a.value();
  for (std::size_t k = 0; k < out.size(); ++k) out.data[k] *= b.value().data[k];
  const std::size_t ia = a.id(), ib = b.id();
  return detail::tape_of(a).record(std::move(out), {a, b}, [ia, ib](Tape& t, const Matrix&, const Matrix& g) {
    if (Matrix* acc = t.accumulator(ia)) {
      const Matrix& B = t.value(ib);
      for (std::size_t k = 0; k < g.size(); ++k) acc->data[k] += g.data[k] * B.data[k];
    }
    if (Matrix* acc = t.accumulator(ib)) {
      const Matrix& A = t.value(ia);
      for (std::size_t k = 0; k < g.size(); ++k) acc->data[k] += g.data[k] * A.data[k];
    }
  });
}

inline Var scale(const Var& a, double s) {
  Matrix out = a.value();
  for (double& v : out.data) v *= s;
  const std::size_t ia = a.id();
  return detail::tape_of(a).record(std::move(out), {a}, [ia, s](Tape& t, const Matrix&, const Matrix& g) {
    if (Matrix* acc = t.accumulator(ia))
      for (std::size_t k = 0; k < g.size(); ++k) acc->data[k] += s * g.data[k];
  });
}

inline Var neg(const Var& a) { return scale(a, -1.0); }

/// a (n x m) plus row vector b (1 x m) broadcast over rows.
inline Var add_row(const Var& a, const Var& b) {
  if (b.rows() != 1 || b.cols() != a.cols()) {
    throw ShapeError("add_row: shapes " + a.value().shape_string() + " and " + b.value().shape_string() +
                     " incompatible");
  }
  Matrix out = a.value();
  for (std::size_t i = 0; i < out.rows; ++i)
    for (std::size_t j = 0; j < out.cols; ++j) out(i, j) += b.value().data[j];
  const std::size_t ia = a.id(), ib = b.id();
  return detail::tape_of(a).record(std::move(out), {a, b}, [ia, ib](Tape& t, const Matrix&, const Matrix& g) {
    detail::add_into(t.accumulator(ia), g);
    if (Matrix* acc = t.accumulator(ib))
      for (std::size_t i = 0; i < g.rows; ++i)
        for (std::size_t j = 0; j < g.cols; ++j) acc->data[j] += g(i, j);
  });
}

inline Var relu(const Var& a) {
  return detail::unary(a, [](double x) { return x > 0.0 ? x : 0.0; },
                       [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

inline Var tanh(const Var& a) {
  return detail::unary(a, [](double x) { return std::tanh(x); },
                       [](double, double y) { return 1.0 - y * y; });
}

inline Var sigmoid(const Var& a) {
  return detail::unary(a, sigmoid_value, [](double, double y) { return y * (1.0 - y); });
}

/// log(1 + exp(x)) in the overflow-safe form.
inline Var softplus(const Var& a) { return detail::unary(a, softplus_value, [](double x, double) { return sigmoid_value(x); }); }

inline Var log(const Var& a) {
  return detail::unary(a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

/// Row-wise softmax with the row max subtracted.
inline Var softmax_rows(const Var& a) {
  const Matrix& x = a.value();
  Matrix out(x.rows, x.cols);
  for (std::size_t i = 0; i < x.rows; ++i) {
    const auto xr = x.row(i);
    const double mx = *std::max_element(xr.begin(), xr.end());
    double z = 0.0;
    for (std::size_t j = 0; j < x.cols; ++j) z += (out(i, j) = std::exp(xr[j] - mx));
    for (std::size_t j = 0; j < x.cols; ++j) out(i, j) /= z;
  }
  const std::size_t ia = a.id();
  return detail::tape_of(a).record(std::move(out), {a}, [ia](Tape& t, const Matrix& s, const Matrix& g) {
    Matrix* acc = t.accumulator(ia);
    if (!acc) return;
    for (std::size_t i = 0; i < s.rows; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < s.cols; ++j) dot += g(i, j) * s(i, j);
      for (std::size_t j = 0; j < s.cols; ++j) (*acc)(i, j) += s(i, j) * (g(i, j) - dot);
    }
  });
}

/// Sum of all entries, as a 1x1.
inline Var sum(const Var& a) {
  double total = 0.0;
  for (double v : a.value().data) total += v;
  const std::size_t ia = a.id();
  return detail::tape_of(a).record(Matrix::scalar(total), {a}, [ia](Tape& t, const Matrix&, const Matrix& g) {
    if (Matrix* acc = t.accumulator(ia))
      for (double& v : acc->data) v += g.data[0];
  });
}

inline Var mean(const Var& a) {
  if (a.value().size() == 0) throw ShapeError("mean: empty input");
  return scale(sum(a), 1.0 / static_cast<double>(a.value().size()));
}

/// Per-row sums, n x 1.
inline Var row_sum(const Var& a) {
  const Matrix& x = a.value();
  Matrix out(x.rows, 1);
  for (std::size_t i = 0; i < x.rows; ++i)
    for (std::size_t j = 0; j < x.cols; ++j) out.data[i] += x(i, j);
  const std::size_t ia = a.id();
  return detail::tape_of(a).record(std::move(out), {a}, [ia](Tape& t, const Matrix&, const Matrix& g) {
    if (Matrix* acc = t.accumulator(ia))
      for (std::size_t i = 0; i < acc->rows; ++i)
        for (std::size_t j = 0; j < acc->cols; ++j) (*acc)(i, j) += g.data[i];
  });
}

/// Stacks inputs vertically; all must share the column count.
inline Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  const std::size_t cols = parts[0].cols();
  std::size_t rows = 0;
  for (const Var& p : parts) {
    if (p.cols() != cols) {
      throw ShapeError("concat_rows: shapes " + parts[0].value().shape_string() + " and " +
                       p.value().shape_string() + " incompatible");
    }
    rows += p.rows();
  }
  Matrix out(rows, cols);
  std::vector<std::size_t> ids;
  ids.reserve(parts.size());
  auto dst = out.data.begin();
  for (const Var& p : parts) {
    dst = std::copy(p.value().data.begin(), p.value().data.end(), dst);
    ids.push_back(p.id());
  }
  return detail::tape_of(parts[0]).record(std::move(out), parts,
                                          [ids = std::move(ids)](Tape& t, const Matrix&, const Matrix& g) {
                                            std::size_t offset = 0;
                                            for (std::size_t id : ids) {
                                              const std::size_t n = t.value(id).size();
                                              if (Matrix* acc = t.accumulator(id))
                                                for (std::size_t k = 0; k < n; ++k) acc->data[k] += g.data[offset + k];
                                              offset += n;
                                            }
                                          });
}

/// Same data, new shape (row-major order preserved).
inline Var reshape(const Var& a, std::size_t rows, std::size_t cols) {
  if (rows * cols != a.value().size()) {
    throw ShapeError("reshape: cannot view " + a.value().shape_string() + " as " + std::to_string(rows) + "x" +
                     std::to_string(cols));
  }
  Matrix out = a.value();
  out.rows = rows;
  out.cols = cols;
  const std::size_t ia = a.id();
  return detail::tape_of(a).record(std::move(out), {a}, [ia](Tape& t, const Matrix&, const Matrix& g) {
    if (Matrix* acc = t.accumulator(ia))
      for (std::size_t k = 0; k < g.size(); ++k) acc->data[k] += g.data[k];
  });
}

/// Row r of the output is row idx[r] of a; gradients scatter-add back.
inline Var gather_rows(const Var& a, std::vector<std::size_t> idx) {
  const Matrix& x = a.value();
  Matrix out(idx.size(), x.cols);
  for (std::size_t r = 0; r < idx.size(); ++r) {
    if (idx[r] >= x.rows) {
      throw ShapeError("gather_rows: index " + std::to_string(idx[r]) + " out of range for " + x.shape_string());
    }
    std::copy_n(x.data.begin() + idx[r] * x.cols, x.cols, out.data.begin() + r * x.cols);
  }
  const std::size_t ia = a.id();
  return detail::tape_of(a).record(std::move(out), {a},
                                   [ia, idx = std::move(idx)](Tape& t, const Matrix&, const Matrix& g) {
                                     Matrix* acc = t.accumulator(ia);
                                     if (!acc) return;
                                     for (std::size_t r = 0; r < idx.size(); ++r)
                                       for (std::size_t j = 0; j < g.cols; ++j) (*acc)(idx[r], j) += g(r, j);
                                   });
}

namespace detail {

inline void check_offsets(const char* op, const std::vector<std::size_t>& offsets, std::size_t rows) {
  if (offsets.empty() || offsets.front() != 0 || offsets.back() != rows) {
    throw ShapeError(std::string(op) + ": segment offsets do not cover " + std::to_string(rows) + " rows");
  }
  for (std::size_t s = 1; s < offsets.size(); ++s)
    if (offsets[s] < offsets[s - 1]) throw ShapeError(std::string(op) + ": segment offsets must be non-decreasing");
}

}  // namespace detail

/// Column-wise softmax within each row segment [offsets[s], offsets[s+1]).
/// With one segment per stacked instance this is a per-instance softmax over
/// its nodes.
inline Var segment_softmax(const Var& a, std::vector<std::size_t> offsets) {
  const Matrix& x = a.value();
  detail::check_offsets("segment_softmax", offsets, x.rows);
  Matrix out(x.rows, x.cols);
  for (std::size_t s = 0; s + 1 < offsets.size(); ++s) {
    const std::size_t lo = offsets[s], hi = offsets[s + 1];
    if (lo == hi) continue;
    for (std::size_t j = 0; j < x.cols; ++j) {
      double mx = x(lo, j);
      for (std::size_t r = lo + 1; r < hi; ++r) mx = std::max(mx, x(r, j));
      double z = 0.0;
      for (std::size_t r = lo; r < hi; ++r) z += (out(r, j) = std::exp(x(r, j) - mx));
      for (std::size_t r = lo; r < hi; ++r) out(r, j) /= z;
    }
  }
  const std::size_t ia = a.id();
  return detail::tape_of(a).record(
      std::move(out), {a}, [ia, offsets = std::move(offsets)](Tape& t, const Matrix& s, const Matrix& g) {
        Matrix* acc = t.accumulator(ia);
        if (!acc) return;
        for (std::size_t seg = 0; seg + 1 < offsets.size(); ++seg) {
          const std::size_t lo = offsets[seg], hi = offsets[seg + 1];
          for (std::size_t j = 0; j < s.cols; ++j) {
            double dot = 0.0;
            for (std::size_t r = lo; r < hi; ++r) dot += g(r, j) * s(r, j);
            for (std::size_t r = lo; r < hi; ++r) (*acc)(r, j) += s(r, j) * (g(r, j) - dot);
          }
        }
      });
}

/// Per-segment weighted pooling: row s of the result is flatten(S_sᵀ H_s),
/// i.e. out(s, k*v + j) = Σ_{r in segment s} S(r,k) H(r,j), for S rows x r
/// and H rows x v.
inline Var segment_pool(const Var& S, const Var& H, std::vector<std::size_t> offsets) {
  const Matrix& sv = S.value();
  const Matrix& hv = H.value();
  if (sv.rows != hv.rows) {
    throw ShapeError("segment_pool: shapes " + sv.shape_string() + " and " + hv.shape_string() + " differ in rows");
  }
  detail::check_offsets("segment_pool", offsets, sv.rows);
  const std::size_t views = sv.cols, width = hv.cols;
  Matrix out(offsets.size() - 1, views * width);
  for (std::size_t seg = 0; seg + 1 < offsets.size(); ++seg) {
    double* o = out.data.data() + seg * out.cols;
    for (std::size_t r = offsets[seg]; r < offsets[seg + 1]; ++r)
      for (std::size_t k = 0; k < views; ++k) {
        const double w = sv(r, k);
        for (std::size_t j = 0; j < width; ++j) o[k * width + j] += w * hv(r, j);
      }
  }
  const std::size_t is = S.id(), ih = H.id();
  return detail::tape_of(S).record(
      std::move(out), {S, H}, [is, ih, offsets = std::move(offsets)](Tape& t, const Matrix&, const Matrix& g) {
        const Matrix& sv = t.value(is);
        const Matrix& hv = t.value(ih);
        Matrix* ds = t.accumulator(is);
        Matrix* dh = t.accumulator(ih);
        const std::size_t views = sv.cols, width = hv.cols;
        for (std::size_t seg = 0; seg + 1 < offsets.size(); ++seg) {
          const double* gr = g.data.data() + seg * g.cols;
          for (std::size_t r = offsets[seg]; r < offsets[seg + 1]; ++r)
            for (std::size_t k = 0; k < views; ++k) {
              if (ds) {
                double acc = 0.0;
                for (std::size_t j = 0; j < width; ++j) acc += gr[k * width + j] * hv(r, j);
                (*ds)(r, k) += acc;
              }
              if (dh) {
                const double w = sv(r, k);
                for (std::size_t j = 0; j < width; ++j) (*dh)(r, j) += w * gr[k * width + j];
              }
            }
        }
      });
}

/// Inverted dropout. Identity when not training or when rate is 0.
inline Var dropout(const Var& a, double rate, bool training, Rng& rng) {
  if (rate < 0.0 || rate >= 1.0) throw Error("dropout: rate must be in [0, 1)");
  if (!training || rate == 0.0) return a;
  const double keep_scale = 1.0 / (1.0 - rate);
  Matrix mask(a.rows(), a.cols());
  for (double& m : mask.data) m = rng.bernoulli(rate) ? 0.0 : keep_scale;
  Matrix out = a.value();
  for (std::size_t k = 0; k < out.size(); ++k) out.data[k] *= mask.data[k];
  const std::size_t ia = a.id();
  return detail::tape_of(a).record(std::move(out), {a},
                                   [ia, mask = std::move(mask)](Tape& t, const Matrix&, const Matrix& g) {
                                     if (Matrix* acc = t.accumulator(ia))
                                       for (std::size_t k = 0; k < g.size(); ++k) acc->data[k] += g.data[k] * mask.data[k];
                                   });
}

inline constexpr double kProbFloor = 1e-12;

/// Mean over rows of -log(max(probs[i, labels[i]], 1e-12)).
inline Var cross_entropy(const Var& probs, std::span<const int> labels) {
  const Matrix& p = probs.value();
  if (labels.size() != p.rows) {
    throw ShapeError("cross_entropy: " + std::to_string(labels.size()) + " labels for probs " + p.shape_string());
  }
  if (p.rows == 0) throw ShapeError("cross_entropy: empty batch");
  double total = 0.0;
  for (std::size_t i = 0; i < p.rows; ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= p.cols) {
      throw ShapeError("cross_entropy: label " + std::to_string(labels[i]) + " out of range for " + p.shape_string());
    }
    total -= std::log(std::max(p(i, labels[i]), kProbFloor));
  }
  const double n = static_cast<double>(p.rows);
  const std::size_t ip = probs.id();
  std::vector<int> ys(labels.begin(), labels.end());
  return detail::tape_of(probs).record(Matrix::scalar(total / n), {probs},
                                       [ip, n, ys = std::move(ys)](Tape& t, const Matrix&, const Matrix& g) {
                                         Matrix* acc = t.accumulator(ip);
                                         if (!acc) return;
                                         const Matrix& p = t.value(ip);
                                         for (std::size_t i = 0; i < ys.size(); ++i) {
                                           const double pv = p(i, ys[i]);
                                           if (pv > kProbFloor) (*acc)(i, ys[i]) -= g.data[0] / (n * pv);
                                         }
                                       });
}

}  // namespace ops
}  // namespace seal
