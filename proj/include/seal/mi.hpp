#pragma once

#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include "seal/error.hpp"
#include "seal/graph.hpp"
#include "seal/rng.hpp"
#include "seal/tensor.hpp"

namespace seal {

/// Which (e_j, γ_i) pairs count as positives for the hierarchy-level term.
enum class HierPairs {
  /// j ranges over i and its neighbors in the instance graph, weight 1/|N(i) ∪ {i}|.
  Neighborhood,
  /// j ranges over every instance with weight 1/N. The shuffled negatives are
  /// then a permutation of the positives for each i.
  All,
};

struct MIOptions {
  HierPairs hier_pairs = HierPairs::Neighborhood;
  std::size_t negatives_per_positive = 1;
};

/// JSD estimate from raw (pre-sigmoid) discriminator scores:
/// mean(-sp(-D+)) - mean(sp(D-)).
inline double jsd_pair(std::span<const double> pos, std::span<const double> neg) {
  if (pos.empty() || neg.empty()) throw Error("jsd_pair: need at least one positive and one negative score");
  double p = 0.0, n = 0.0;
  for (double d : pos) p -= ops::softplus_value(-d);
  for (double d : neg) n += ops::softplus_value(d);
  return p / static_cast<double>(pos.size()) - n / static_cast<double>(neg.size());
}

/// Differentiable form of jsd_pair over column vectors of scores.
inline Var jsd_pair(const Var& pos, const Var& neg) {
  if (pos.value().size() == 0 || neg.value().size() == 0) {
    throw Error("jsd_pair: need at least one positive and one negative score");
  }
  return ops::sub(ops::neg(ops::mean(ops::softplus(ops::neg(pos)))), ops::mean(ops::softplus(neg)));
}

/// Instance-level term: average over instances i of the JSD between node reps
/// of i paired with e_i (positives) and node reps of one other uniformly drawn
/// instance paired with e_i (negatives). Each node of an n-node instance thus
/// carries weight 1/(N n).
///
/// `node_reps[i]` is n_i x v, `embeddings[i]` is 1 x m, `W_DI` is v x m.
inline Var instance_mi(std::span<const Var> node_reps, std::span<const Var> embeddings, const Var& W_DI, Rng& rng,
                       const MIOptions& opt = {}) {
  const std::size_t count = node_reps.size();
  if (count < 2) throw Error("instance_mi: need at least two instances to draw negatives");
  if (embeddings.size() != count) throw ShapeError("instance_mi: node_reps and embeddings differ in length");
  std::vector<Var> per_instance;
  per_instance.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    // W_DI e_i^T, so that each score is h^T (W_DI e_i^T).
    Var projected = ops::matmul(W_DI, ops::transpose(embeddings[i]));
    Var pos = ops::matmul(node_reps[i], projected);
    std::size_t other = rng.below(count - 1);
    if (other >= i) ++other;
    const std::size_t n_other = node_reps[other].rows();
    std::vector<std::size_t> idx(node_reps[i].rows() * opt.negatives_per_positive);
    for (auto& k : idx) k = rng.below(n_other);
    Var neg = ops::matmul(ops::gather_rows(node_reps[other], std::move(idx)), projected);
    per_instance.push_back(jsd_pair(pos, neg));
  }
  return ops::mean(ops::concat_rows(per_instance));
}

/// instance_mi over stacked node reps `H` (segments given by `offsets`) and
/// embedding rows `E`. Draws negatives in the same order as instance_mi, so
/// both agree for equal RNG state.
inline Var instance_mi_batch(const Var& H, const Var& E, const std::vector<std::size_t>& offsets, const Var& W_DI,
                             Rng& rng, const MIOptions& opt = {}) {
  const std::size_t count = E.rows();
  if (count < 2) throw Error("instance_mi: need at least two instances to draw negatives");
  if (offsets.size() != count + 1 || offsets.back() != H.rows()) {
    throw ShapeError("instance_mi_batch: offsets do not match node reps and embeddings");
  }
  Tape& tape = *H.tape();
  const std::size_t total = H.rows();
  const std::size_t npp = opt.negatives_per_positive;
  std::vector<std::size_t> owner(total), neg_rows, neg_owner;
  Matrix w_pos(total, 1);
  neg_rows.reserve(total * npp);
  neg_owner.reserve(total * npp);
  std::vector<double> w_neg;
  w_neg.reserve(total * npp);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t lo = offsets[i], n = offsets[i + 1] - lo;
    if (n == 0) throw Error("instance_mi: instance without nodes");
    for (std::size_t r = lo; r < lo + n; ++r) {
      owner[r] = i;
      w_pos(r, 0) = 1.0 / (static_cast<double>(count) * static_cast<double>(n));
    }
    std::size_t other = rng.below(count - 1);
    if (other >= i) ++other;
    const std::size_t other_lo = offsets[other], n_other = offsets[other + 1] - other_lo;
    const double w = 1.0 / (static_cast<double>(count) * static_cast<double>(n * npp));
    for (std::size_t k = 0; k < n * npp; ++k) {
      neg_rows.push_back(other_lo + rng.below(n_other));
      neg_owner.push_back(i);
      w_neg.push_back(w);
    }
  }
  Matrix wn(w_neg.size(), 1);
  wn.data = std::move(w_neg);
  // Row i of P is (W_DI e_iᵀ)ᵀ, so each score is h · P_i.
  Var P = ops::matmul(E, ops::transpose(W_DI));
  Var pos = ops::row_sum(ops::mul(H, ops::gather_rows(P, std::move(owner))));
  Var neg = ops::row_sum(ops::mul(ops::gather_rows(H, std::move(neg_rows)), ops::gather_rows(P, std::move(neg_owner))));
  Var pos_term = ops::sum(ops::mul(tape.constant(std::move(w_pos)), ops::neg(ops::softplus(ops::neg(pos)))));
  Var neg_term = ops::sum(ops::mul(tape.constant(std::move(wn)), ops::softplus(neg)));
  return ops::sub(pos_term, neg_term);
}

/// Hierarchy-level term: for each instance i, the weighted JSD between
/// (e_j, γ_i) positives and (ê_j, γ_i) negatives, where ê is E with its rows
/// permuted by one uniform shuffle; averaged over i.
///
/// `E` is N x m, `gamma` is N x c, `W_DH` is m x c.
inline Var hier_mi(const Var& E, const Var& gamma, const Var& W_DH, const std::vector<std::vector<std::size_t>>& neighbors,
                   Rng& rng, const MIOptions& opt = {}) {
  const std::size_t count = E.rows();
  if (count == 0) throw Error("hier_mi: empty hierarchy");
  if (gamma.rows() != count) throw ShapeError("hier_mi: E and gamma differ in row count");
  Tape& tape = *E.tape();
  const auto perm = rng.permutation(count);
  Var projected = ops::matmul(E, W_DH);  // row j: e_j^T W_DH

  if (opt.hier_pairs == HierPairs::All) {
    Var scores = ops::matmul(projected, ops::transpose(gamma));  // [j, i] = e_j^T W γ_i
    Var shuffled = ops::gather_rows(scores, perm);
    return jsd_pair(ops::reshape(scores, count * count, 1), ops::reshape(shuffled, count * count, 1));
  }

  if (neighbors.size() != count) throw ShapeError("hier_mi: neighbor lists do not match instance count");
  std::vector<std::size_t> js, js_neg, is;
  std::vector<double> weights;
  for (std::size_t i = 0; i < count; ++i) {
    const double w = 1.0 / (static_cast<double>(count) * static_cast<double>(neighbors[i].size() + 1));
    auto add = [&](std::size_t j) {
      js.push_back(j);
      js_neg.push_back(perm[j]);
      is.push_back(i);
      weights.push_back(w);
    };
    add(i);
    for (std::size_t j : neighbors[i]) add(j);
  }
  Matrix wm(weights.size(), 1);
  wm.data = std::move(weights);
  Var w = tape.constant(std::move(wm));
  Var g = ops::gather_rows(gamma, is);
  Var pos = ops::row_sum(ops::mul(ops::gather_rows(projected, js), g));
  Var neg = ops::row_sum(ops::mul(ops::gather_rows(projected, js_neg), g));
  Var per_pair = ops::sub(ops::neg(ops::softplus(ops::neg(pos))), ops::softplus(neg));
  return ops::sum(ops::mul(w, per_pair));
}

/// ξ = α (I(G;E) + I(E;Γ)).
inline double hgmi(double instance_mi_value, double hier_mi_value, double alpha_weight) {
  return alpha_weight * (instance_mi_value + hier_mi_value);
}

inline Var hgmi(const Var& instance_mi_value, const Var& hier_mi_value, double alpha_weight) {
  return ops::scale(ops::add(instance_mi_value, hier_mi_value), alpha_weight);
}

}  // namespace seal
