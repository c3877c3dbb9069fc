#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "seal/tensor.hpp"

namespace seal {

using Edge = std::pair<std::size_t, std::size_t>;

/// Canonical edge list: u < v, no self-loops, no duplicates, sorted.
/// Self-loops are dropped; callers that must reject them check first.
inline std::vector<Edge> canonical_edges(std::vector<Edge> edges) {
  for (auto& [u, v] : edges)
    if (u > v) std::swap(u, v);
  std::erase_if(edges, [](const Edge& e) { return e.first == e.second; });
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  return edges;
}

/// One inner graph of the hierarchy.
struct GraphInstance {
  long long id = 0;
  std::size_t n = 0;
  std::vector<Edge> edges;
  Matrix features;  // n x d
  std::optional<int> label;
  std::optional<std::string> generator_tag;

  std::size_t feature_dim() const { return features.cols; }

  std::vector<std::size_t> degrees() const {
    std::vector<std::size_t> deg(n, 0);
    for (const auto& [u, v] : edges) {
      ++deg[u];
      ++deg[v];
    }
    return deg;
  }

  /// 2|E| / (n(n-1)); 0 for single-node graphs.
  double density() const {
    if (n < 2) return 0.0;
    return 2.0 * static_cast<double>(edges.size()) / (static_cast<double>(n) * static_cast<double>(n - 1));
  }

  friend bool operator==(const GraphInstance&, const GraphInstance&) = default;
};

/// A graph whose nodes are GraphInstances, with the labeled/unlabeled/test split.
struct HierarchicalGraph {
  std::vector<GraphInstance> instances;
  std::vector<Edge> hier_edges;
  int num_classes = 0;
  std::vector<std::size_t> labeled_ids;
  std::vector<std::size_t> unlabeled_ids;
  std::vector<std::size_t> test_ids;

  std::size_t size() const { return instances.size(); }
  std::size_t num_labeled() const { return labeled_ids.size(); }
  std::size_t num_unlabeled() const { return unlabeled_ids.size(); }

  friend bool operator==(const HierarchicalGraph&, const HierarchicalGraph&) = default;
};

struct Violation {
  long long instance_id = -1;  // -1 for dataset-level problems
  std::string reason;

  friend bool operator==(const Violation&, const Violation&) = default;
};

inline std::string to_string(const Violation& v) {
  if (v.instance_id < 0) return v.reason;
  return "instance " + std::to_string(v.instance_id) + ": " + v.reason;
}

namespace detail {

inline void check_edge_list(const std::vector<Edge>& edges, std::size_t n, long long id,
                            std::vector<Violation>& out) {
  std::vector<Edge> seen;
  seen.reserve(edges.size());
  for (const auto& [u, v] : edges) {
    if (u >= n || v >= n) {
      out.push_back({id, "edge (" + std::to_string(u) + "," + std::to_string(v) + ") endpoint out of range [0," +
                             std::to_string(n) + ")"});
      continue;
    }
    if (u == v) {
      out.push_back({id, "self-loop at " + std::to_string(u)});
      continue;
    }
    seen.emplace_back(std::min(u, v), std::max(u, v));
  }
  std::sort(seen.begin(), seen.end());
  if (std::adjacent_find(seen.begin(), seen.end()) != seen.end()) out.push_back({id, "duplicate edge"});
}

}  // namespace detail

/// Every invariant violation in `h`; empty means valid.
inline std::vector<Violation> validate(const HierarchicalGraph& h) {
  std::vector<Violation> out;
  const std::size_t count = h.instances.size();
  std::optional<std::size_t> feature_dim;
  for (const GraphInstance& g : h.instances) {
    if (g.n < 1) out.push_back({g.id, "empty node set"});
    detail::check_edge_list(g.edges, g.n, g.id, out);
    if (g.features.rows != g.n) {
      out.push_back({g.id, "feature matrix has " + std::to_string(g.features.rows) + " rows, expected " +
                               std::to_string(g.n)});
    }
    if (!feature_dim) feature_dim = g.features.cols;
    if (g.features.cols != *feature_dim) out.push_back({g.id, "feature width differs from other instances"});
    for (double x : g.features.data) {
      if (!std::isfinite(x)) {
        out.push_back({g.id, "non-finite feature"});
        break;
      }
    }
    if (g.label && (*g.label < 0 || *g.label >= h.num_classes)) {
      out.push_back({g.id, "label " + std::to_string(*g.label) + " outside [0," + std::to_string(h.num_classes) + ")"});
    }
  }
  if (h.num_classes < 0) out.push_back({-1, "negative num_classes"});
  detail::check_edge_list(h.hier_edges, count, -1, out);

  std::vector<int> owner(count, -1);
  auto check_split = [&](const std::vector<std::size_t>& ids, int tag, const char* name, bool needs_label) {
    for (std::size_t i : ids) {
      if (i >= count) {
        out.push_back({-1, std::string(name) + " index " + std::to_string(i) + " out of range"});
        continue;
      }
      if (owner[i] != -1) {
        out.push_back({h.instances[i].id, std::string("appears in more than one split (") + name + ")"});
      }
      owner[i] = tag;
      if (needs_label && !h.instances[i].label) out.push_back({h.instances[i].id, "missing label"});
    }
  };
  check_split(h.labeled_ids, 0, "labeled", true);
  check_split(h.unlabeled_ids, 1, "unlabeled", false);
  check_split(h.test_ids, 2, "test", true);
  return out;
}

/// Dense D^{-1/2} (A + I) D^{-1/2} for an edge list over `n` nodes.
inline Matrix normalize_adjacency(std::size_t n, const std::vector<Edge>& edges) {
  Matrix a = Matrix::identity(n);
  for (const auto& [u, v] : edges) {
    a(u, v) = 1.0;
    a(v, u) = 1.0;
  }
  std::vector<double> inv_sqrt(n);
  for (std::size_t i = 0; i < n; ++i) {
    double deg = 0.0;
    for (std::size_t j = 0; j < n; ++j) deg += a(i, j);
    inv_sqrt[i] = 1.0 / std::sqrt(deg);
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) a(i, j) *= inv_sqrt[i] * inv_sqrt[j];
  return a;
}

inline Matrix normalize_adjacency(const GraphInstance& g) { return normalize_adjacency(g.n, g.edges); }

/// Same operator as normalize_adjacency, in CSR form; built in O(n + |E|).
inline SparseMatrix normalized_adjacency_sparse(std::size_t n, const std::vector<Edge>& edges) {
  std::vector<std::vector<std::size_t>> nbrs(n);
  for (std::size_t i = 0; i < n; ++i) nbrs[i].push_back(i);
  for (const auto& [u, v] : edges) {
    nbrs[u].push_back(v);
    nbrs[v].push_back(u);
  }
  std::vector<double> inv_sqrt(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::sort(nbrs[i].begin(), nbrs[i].end());
    nbrs[i].erase(std::unique(nbrs[i].begin(), nbrs[i].end()), nbrs[i].end());
    inv_sqrt[i] = 1.0 / std::sqrt(static_cast<double>(nbrs[i].size()));
  }
  SparseMatrix s;
  s.rows = s.cols = n;
  s.row_ptr.assign(1, 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j : nbrs[i]) {
      s.col_idx.push_back(j);
      s.values.push_back(inv_sqrt[i] * inv_sqrt[j]);
    }
    s.row_ptr.push_back(s.col_idx.size());
  }
  return s;
}

/// Undirected neighbor lists of the instance-level graph.
inline std::vector<std::vector<std::size_t>> hier_neighbors(const HierarchicalGraph& h) {
  std::vector<std::vector<std::size_t>> nbrs(h.size());
  for (const auto& [u, v] : h.hier_edges) {
    nbrs[u].push_back(v);
    nbrs[v].push_back(u);
  }
  for (auto& list : nbrs) std::sort(list.begin(), list.end());
  return nbrs;
}

}  // namespace seal
