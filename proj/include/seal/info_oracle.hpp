#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "seal/error.hpp"
#include "seal/rng.hpp"

namespace seal::info {

/// Variable selectors for the three alphabets, combinable as bit masks.
enum : unsigned { G = 1u, E = 2u, Gamma = 4u };

using Sizes = std::array<std::size_t, 3>;

/// Exact joint distribution over three finite alphabets, indexed (g, e, γ).
struct JointDistribution3 {
  Sizes sizes{0, 0, 0};
  std::vector<double> p;

  JointDistribution3() = default;
  explicit JointDistribution3(Sizes s) : sizes(s), p(s[0] * s[1] * s[2], 0.0) {}

  double& at(std::size_t g, std::size_t e, std::size_t y) { return p[(g * sizes[1] + e) * sizes[2] + y]; }
  double at(std::size_t g, std::size_t e, std::size_t y) const { return p[(g * sizes[1] + e) * sizes[2] + y]; }

  double total() const {
    double s = 0.0;
    for (double v : p) s += v;
    return s;
  }

  void check() const {
    if (p.size() != sizes[0] * sizes[1] * sizes[2]) throw Error("joint distribution: table size mismatch");
    for (double v : p)
      if (!(v >= 0.0)) throw Error("joint distribution: negative or NaN entry");
    if (std::abs(total() - 1.0) > 1e-12) throw Error("joint distribution: entries do not sum to one");
  }
};

namespace detail {

/// Index of the cell's projection onto `mask` within a dense marginal table.
inline std::size_t project(const Sizes& s, std::size_t g, std::size_t e, std::size_t y, unsigned mask) {
  std::size_t idx = 0;
  if (mask & G) idx = idx * s[0] + g;
  if (mask & E) idx = idx * s[1] + e;
  if (mask & Gamma) idx = idx * s[2] + y;
  return idx;
}

inline std::size_t table_size(const Sizes& s, unsigned mask) {
  std::size_t n = 1;
  if (mask & G) n *= s[0];
  if (mask & E) n *= s[1];
  if (mask & Gamma) n *= s[2];
  return n;
}

inline std::vector<double> marginal(const JointDistribution3& j, unsigned mask) {
  std::vector<double> m(table_size(j.sizes, mask), 0.0);
  for (std::size_t g = 0; g < j.sizes[0]; ++g)
    for (std::size_t e = 0; e < j.sizes[1]; ++e)
      for (std::size_t y = 0; y < j.sizes[2]; ++y) m[project(j.sizes, g, e, y, mask)] += j.at(g, e, y);
  return m;
}

}  // namespace detail

/// I(A;B|C) = Σ p(a,b,c) log[ p(a,b,c) p(c) / (p(a,c) p(b,c)) ], with 0 log 0 = 0.
/// A, B, C are disjoint variable masks; C may be empty.
inline double exact_cond_mi(const JointDistribution3& j, unsigned a, unsigned b, unsigned c = 0) {
  if ((a & b) || (a & c) || (b & c) || a == 0 || b == 0) throw Error("exact_cond_mi: masks must be disjoint and non-empty");
  const auto p_abc = detail::marginal(j, a | b | c);
  const auto p_ac = detail::marginal(j, a | c);
  const auto p_bc = detail::marginal(j, b | c);
  const auto p_c = detail::marginal(j, c);
  const Sizes& s = j.sizes;
  // Walk the marginal over a|b|c once per distinct cell.
  std::vector<bool> done(p_abc.size(), false);
  double total = 0.0;
  for (std::size_t g = 0; g < s[0]; ++g)
    for (std::size_t e = 0; e < s[1]; ++e)
      for (std::size_t y = 0; y < s[2]; ++y) {
        const std::size_t k = detail::project(s, g, e, y, a | b | c);
        if (done[k]) continue;
        done[k] = true;
        const double pj = p_abc[k];
        if (pj <= 0.0) continue;
        const double pc = p_c[detail::project(s, g, e, y, c)];
        const double pac = p_ac[detail::project(s, g, e, y, a | c)];
        const double pbc = p_bc[detail::project(s, g, e, y, b | c)];
        total += pj * std::log(pj * pc / (pac * pbc));
      }
  return total;
}

inline double exact_mi(const JointDistribution3& j, unsigned a, unsigned b) { return exact_cond_mi(j, a, b, 0); }

/// I(G;E;Γ) = I(G;E) - I(G;E|Γ).
inline double interaction_info(const JointDistribution3& j) {
  return exact_mi(j, G, E) - exact_cond_mi(j, G, E, Gamma);
}

/// Point on the simplex: normalized exponentials of standard normal draws.
inline std::vector<double> random_simplex(Rng& rng, std::size_t k) {
  std::vector<double> w(k);
  double z = 0.0;
  for (double& x : w) z += (x = std::exp(rng.normal()));
  for (double& x : w) x /= z;
  return w;
}

/// p(g) p(e|g) p(γ|e), so I(G;Γ|E) = 0 by construction.
inline JointDistribution3 random_markov_chain(Rng& rng, Sizes sizes) {
  JointDistribution3 j(sizes);
  const auto pg = random_simplex(rng, sizes[0]);
  std::vector<std::vector<double>> pe_g(sizes[0]), py_e(sizes[1]);
  for (auto& row : pe_g) row = random_simplex(rng, sizes[1]);
  for (auto& row : py_e) row = random_simplex(rng, sizes[2]);
  for (std::size_t g = 0; g < sizes[0]; ++g)
    for (std::size_t e = 0; e < sizes[1]; ++e)
      for (std::size_t y = 0; y < sizes[2]; ++y) j.at(g, e, y) = pg[g] * pe_g[g][e] * py_e[e][y];
  return j;
}

/// Unstructured joint with full support.
inline JointDistribution3 random_joint(Rng& rng, Sizes sizes) {
  JointDistribution3 j(sizes);
  j.p = random_simplex(rng, j.p.size());
  return j;
}

struct CheckResult {
  std::string check;
  std::size_t trials = 0;
  double max_violation = 0.0;
  double tolerance = 0.0;
  bool pass() const { return max_violation < tolerance; }
};

struct IdentityReport {
  std::vector<CheckResult> checks;
  bool all_pass() const {
    return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.pass(); });
  }
  double max_violation() const {
    double m = 0.0;
    for (const auto& c : checks) m = std::max(m, c.max_violation);
    return m;
  }
};

struct VerifyOptions {
  std::size_t trials = 1000;
  /// Fixed alphabet sizes; when unset each trial draws every size from [2, 5].
  std::optional<Sizes> sizes;
  double interaction_tol = 1e-9;
  double bound_tol = 1e-12;
  double alpha_tol = 1e-10;
  double alpha_denominator_floor = 1e-9;
};

/// Checks, over random Markov chains G -> E -> Γ:
///   interaction_eq_end_mi |I(G;E;Γ) - I(G;Γ)|
///   joint_mi_lower_chain  ½(I(E;G)+I(E;Γ)) - I(E;G,Γ), clipped at 0
///   joint_mi_lower_any    the same on unstructured joints
///   joint_mi_upper        I(E;G,Γ) - I(E;G) - I(E;Γ), clipped at 0
///   alpha_range           distance of I(G;E;Γ)/(I(G;E)+I(E;Γ)) outside [0, ½]
inline IdentityReport verify_identities(const VerifyOptions& opt, Rng& rng) {
  CheckResult inter_eq{"interaction_eq_end_mi", 0, 0.0, opt.interaction_tol};
  CheckResult lower_chain{"joint_mi_lower_chain", 0, 0.0, opt.bound_tol};
  CheckResult lower_any{"joint_mi_lower_any", 0, 0.0, opt.bound_tol};
  CheckResult upper{"joint_mi_upper", 0, 0.0, opt.bound_tol};
  CheckResult alpha{"alpha_range", 0, 0.0, opt.alpha_tol};
  auto draw_sizes = [&] {
    if (opt.sizes) return *opt.sizes;
    return Sizes{static_cast<std::size_t>(rng.integer(2, 5)), static_cast<std::size_t>(rng.integer(2, 5)),
                 static_cast<std::size_t>(rng.integer(2, 5))};
  };
  for (std::size_t t = 0; t < opt.trials; ++t) {
    const JointDistribution3 j = random_markov_chain(rng, draw_sizes());
    const double i_ge = exact_mi(j, G, E);
    const double i_ey = exact_mi(j, E, Gamma);
    const double i_gy = exact_mi(j, G, Gamma);
    const double i_e_gy = exact_mi(j, E, G | Gamma);
    const double inter = interaction_info(j);

    inter_eq.max_violation = std::max(inter_eq.max_violation, std::abs(inter - i_gy));
    lower_chain.max_violation = std::max(lower_chain.max_violation, 0.5 * (i_ge + i_ey) - i_e_gy);
    upper.max_violation = std::max(upper.max_violation, i_e_gy - i_ge - i_ey);
    const double denom = i_ge + i_ey;
    if (denom > opt.alpha_denominator_floor) {
      const double a = inter / denom;
      alpha.max_violation = std::max({alpha.max_violation, -a, a - 0.5});
      ++alpha.trials;
    }
    ++inter_eq.trials;
    ++lower_chain.trials;
    ++upper.trials;

    const JointDistribution3 free = random_joint(rng, draw_sizes());
    lower_any.max_violation = std::max(
        lower_any.max_violation, 0.5 * (exact_mi(free, E, G) + exact_mi(free, E, Gamma)) - exact_mi(free, E, G | Gamma));
    ++lower_any.trials;
  }
  return {{inter_eq, lower_chain, lower_any, upper, alpha}};
}

/// CSV rows `check,trials,max_violation,pass`.
inline std::string report_csv(const IdentityReport& r) {
  std::string out = "check,trials,max_violation,pass\n";
  char buf[160];
  for (const auto& c : r.checks) {
    std::snprintf(buf, sizeof buf, "%s,%zu,%.6e,%s\n", c.check.c_str(), c.trials, c.max_violation,
                  c.pass() ? "true" : "false");
    out += buf;
  }
  return out;
}

}  // namespace seal::info
