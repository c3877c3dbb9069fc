#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "seal/error.hpp"
#include "seal/tensor.hpp"

namespace seal {

struct AdamConfig {
  double lr = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected Adam. Moment buffers are keyed by position in the
/// parameter list, so the same list order must be passed on every step.
class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  void step(std::span<Parameter* const> params) {
    if (first_.empty()) {
      for (const Parameter* p : params) {
        first_.emplace_back(p->value.rows, p->value.cols);
        second_.emplace_back(p->value.rows, p->value.cols);
      }
    }
    if (first_.size() != params.size()) throw Error("adam: parameter list changed between steps");
    ++steps_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(steps_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(steps_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      Parameter& p = *params[i];
      if (!p.grad.same_shape(p.value)) p.zero_grad();
      Matrix& m = first_[i];
      Matrix& v = second_[i];
      if (!m.same_shape(p.value)) throw Error("adam: moment shape mismatch for " + p.name);
      for (std::size_t k = 0; k < p.value.size(); ++k) {
        const double g = p.grad.data[k];
        m.data[k] = cfg_.beta1 * m.data[k] + (1.0 - cfg_.beta1) * g;
        v.data[k] = cfg_.beta2 * v.data[k] + (1.0 - cfg_.beta2) * g * g;
        const double mhat = m.data[k] / bc1;
        const double vhat = v.data[k] / bc2;
        p.value.data[k] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
      }
    }
  }

  long long steps() const { return steps_; }
  const AdamConfig& config() const { return cfg_; }
  const std::vector<Matrix>& first_moments() const { return first_; }
  const std::vector<Matrix>& second_moments() const { return second_; }

 private:
  AdamConfig cfg_;
  std::vector<Matrix> first_;
  std::vector<Matrix> second_;
  long long steps_ = 0;
};

/// Scalar objective over a parameter set, re-evaluated on a fresh tape each call.
using ScalarObjective = std::function<Var(Tape&)>;

/// Compares reverse-mode gradients against central differences and returns
/// max_k |analytic - numeric| / max(1e-8, |analytic| + |numeric|).
inline double grad_check(const ScalarObjective& f, std::span<Parameter* const> params, double h = 1e-5) {
  for (Parameter* p : params) p->zero_grad();
  {
    Tape tape;
    Var loss = f(tape);
    tape.backward(loss);
  }
  auto evaluate = [&] {
    Tape tape;
    return f(tape).item();
  };
  double worst = 0.0;
  for (Parameter* p : params) {
    for (std::size_t k = 0; k < p->value.size(); ++k) {
      const double saved = p->value.data[k];
      p->value.data[k] = saved + h;
      const double up = evaluate();
      p->value.data[k] = saved - h;
      const double down = evaluate();
      p->value.data[k] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double analytic = p->grad.data[k];
      const double denom = std::max(1e-8, std::abs(analytic) + std::abs(numeric));
      worst = std::max(worst, std::abs(analytic - numeric) / denom);
    }
  }
  return worst;
}

}  // namespace seal
