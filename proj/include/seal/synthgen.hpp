#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <queue>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "seal/error.hpp"
#include "seal/graph.hpp"
#include "seal/rng.hpp"

namespace seal {

/// The seven random-graph families; the enumerator value is the class index.
enum class GeneratorKind : int {
  WattsStrogatz = 0,
  Tree = 1,
  ErdosRenyi = 2,
  Barbell = 3,
  Bipartite = 4,
  BarabasiAlbert = 5,
  Path = 6,
};

inline constexpr int kNumGeneratorKinds = 7;

inline constexpr std::array<std::string_view, kNumGeneratorKinds> kGeneratorNames = {
    "watts_strogatz", "tree", "erdos_renyi", "barbell", "bipartite", "barabasi_albert", "path"};

/// Per-class instance counts of the 2708-node citation skeleton.
inline constexpr std::array<int, kNumGeneratorKinds> kSkeletonClassCounts = {351, 217, 418, 818, 426, 298, 180};

inline std::string_view generator_name(GeneratorKind k) { return kGeneratorNames[static_cast<int>(k)]; }
inline int class_of(GeneratorKind k) { return static_cast<int>(k); }

inline GeneratorKind kind_of_class(int c) {
  if (c < 0 || c >= kNumGeneratorKinds) throw ConfigError("no generator kind for class " + std::to_string(c));
  return static_cast<GeneratorKind>(c);
}

/// Family-specific constants. The families are named in the benchmark but
/// their internal parameters are not; these values put the per-class mean
/// densities near the published statistics.
struct FamilyConstants {
  int ring_degree = 4;            // Watts-Strogatz lattice degree k
  double barbell_clique_fraction = 0.3;  // each clique holds floor(0.3 n) nodes
  int ba_attachment_scale = 10;   // Barabasi-Albert m = ceil(scale * p)
};

struct SynthConfig {
  std::uint64_t seed = 1;
  std::array<int, 2> n_range{100, 200};
  std::array<double, 2> p_range{0.1, 0.5};
  /// Edge probability range for Erdos-Renyi instances only.
  std::array<double, 2> er_p_range{0.1, 0.35};
  std::array<int, 2> branch_range{1, 3};
  std::array<double, 2> removal_range{0.01, 0.20};
  std::vector<int> class_counts{kSkeletonClassCounts.begin(), kSkeletonClassCounts.end()};
  /// Optional edge-list file for the skeleton; empty selects the random fallback.
  std::string skeleton_path;
  double skeleton_mean_degree = 3.9;
  double skeleton_homophily = 0.8;
  /// "degree" gives [1, deg/(n-1)] per node.
  std::string feature_spec = "degree";
  std::size_t num_labeled = 300;
  std::size_t num_test = 1000;
  FamilyConstants family;

  void check() const {
    auto check_range = [](auto r, const char* name) {
      if (!(r[0] <= r[1])) throw ConfigError(std::string(name) + ": empty range");
    };
    check_range(n_range, "n_range");
    check_range(p_range, "p_range");
    check_range(er_p_range, "er_p_range");
    check_range(branch_range, "branch_range");
    check_range(removal_range, "removal_range");
    if (n_range[0] < 1) throw ConfigError("n_range: node counts must be >= 1");
    if (p_range[0] < 0 || p_range[1] > 1 || er_p_range[0] < 0 || er_p_range[1] > 1)
      throw ConfigError("p_range: probabilities must lie in [0,1]");
    if (branch_range[0] < 1) throw ConfigError("branch_range: branching factor must be >= 1");
    if (removal_range[0] < 0 || removal_range[1] > 1) throw ConfigError("removal_range: fractions must lie in [0,1]");
    if (class_counts.size() != kNumGeneratorKinds) throw ConfigError("class_counts: expected 7 entries");
    for (int c : class_counts)
      if (c < 0) throw ConfigError("class_counts: negative count");
    if (feature_spec != "degree") throw ConfigError("feature_spec: unknown value '" + feature_spec + "'");
    if (skeleton_homophily < 0 || skeleton_homophily > 1) throw ConfigError("skeleton_homophily: must lie in [0,1]");
  }

  std::size_t total_instances() const {
    return static_cast<std::size_t>(std::accumulate(class_counts.begin(), class_counts.end(), 0LL));
  }
};

namespace synth {

inline void add_edge(std::set<Edge>& edges, std::size_t u, std::size_t v) {
  if (u == v) return;
  edges.emplace(std::min(u, v), std::max(u, v));
}

inline std::vector<Edge> watts_strogatz(std::size_t n, int k, double p, Rng& rng) {
  std::set<Edge> edges;
  const std::size_t half = static_cast<std::size_t>(k / 2);
  if (n <= 1) return {};
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 1; j <= half && j < n; ++j) add_edge(edges, i, (i + j) % n);
  // Rewire each lattice edge (i, i+j) to (i, w) with probability p.
  for (std::size_t j = 1; j <= half && j < n; ++j) {
    for (std::size_t i = 0; i < n; ++i) {
      if (!rng.bernoulli(p)) continue;
      const std::size_t v = (i + j) % n;
      const Edge old{std::min(i, v), std::max(i, v)};
      if (!edges.count(old)) continue;
      std::size_t w = rng.below(n);
      int attempts = 0;
      while ((w == i || edges.count({std::min(i, w), std::max(i, w)})) && attempts < 64) {
        w = rng.below(n);
        ++attempts;
      }
      if (w == i || edges.count({std::min(i, w), std::max(i, w)})) continue;
      edges.erase(old);
      add_edge(edges, i, w);
    }
  }
  return {edges.begin(), edges.end()};
}

/// Full r-ary tree in breadth-first numbering, truncated to n nodes.
inline std::vector<Edge> full_tree(std::size_t n, std::size_t branching) {
  std::vector<Edge> edges;
  for (std::size_t i = 1; i < n; ++i) edges.emplace_back((i - 1) / branching, i);
  return edges;
}

inline std::vector<Edge> erdos_renyi(std::size_t n, double p, Rng& rng) {
  std::vector<Edge> edges;
  for (std::size_t u = 0; u < n; ++u)
    for (std::size_t v = u + 1; v < n; ++v)
      if (rng.bernoulli(p)) edges.emplace_back(u, v);
  return edges;
}

/// Two cliques of `clique` nodes joined by a path through the remaining nodes.
inline std::vector<Edge> barbell(std::size_t n, std::size_t clique) {
  clique = std::max<std::size_t>(1, std::min(clique, n / 2));
  std::vector<Edge> edges;
  for (std::size_t u = 0; u < clique; ++u)
    for (std::size_t v = u + 1; v < clique; ++v) edges.emplace_back(u, v);
  const std::size_t second = n - clique;
  for (std::size_t u = second; u < n; ++u)
    for (std::size_t v = u + 1; v < n; ++v) edges.emplace_back(u, v);
  // Chain clique-0 tail -> path nodes -> first node of the second clique.
  for (std::size_t u = clique - 1; u < second; ++u) edges.emplace_back(u, u + 1);
  return canonical_edges(std::move(edges));
}

inline std::vector<Edge> random_bipartite(std::size_t n, double p, Rng& rng) {
  const std::size_t left = n / 2;
  std::vector<Edge> edges;
  for (std::size_t u = 0; u < left; ++u)
    for (std::size_t v = left; v < n; ++v)
      if (rng.bernoulli(p)) edges.emplace_back(u, v);
  return edges;
}

/// Preferential attachment: each new node links to m distinct existing
/// nodes drawn proportionally to degree, seeded with m initial targets.
inline std::vector<Edge> barabasi_albert(std::size_t n, std::size_t m, Rng& rng) {
  m = std::max<std::size_t>(1, std::min(m, n > 1 ? n - 1 : 1));
  std::vector<Edge> edges;
  if (n <= m) return edges;
  std::vector<std::size_t> repeated;
  std::vector<std::size_t> targets(m);
  std::iota(targets.begin(), targets.end(), 0);
  for (std::size_t source = m; source < n; ++source) {
    for (std::size_t t : targets) {
      edges.emplace_back(t, source);
      repeated.push_back(t);
      repeated.push_back(source);
    }
    std::set<std::size_t> chosen;
    while (chosen.size() < m) chosen.insert(repeated[rng.below(repeated.size())]);
    targets.assign(chosen.begin(), chosen.end());
  }
  return canonical_edges(std::move(edges));
}

inline std::vector<Edge> path_graph(std::size_t n) {
  std::vector<Edge> edges;
  for (std::size_t i = 1; i < n; ++i) edges.emplace_back(i - 1, i);
  return edges;
}

/// Removes round(fraction * |E|) edges chosen uniformly at random.
inline std::vector<Edge> remove_fraction(std::vector<Edge> edges, double fraction, Rng& rng) {
  const auto remove = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(edges.size())));
  rng.shuffle(edges);
  edges.resize(edges.size() - std::min(remove, edges.size()));
  std::sort(edges.begin(), edges.end());
  return edges;
}

inline Matrix degree_features(std::size_t n, const std::vector<Edge>& edges) {
  std::vector<std::size_t> deg(n, 0);
  for (const auto& [u, v] : edges) {
    ++deg[u];
    ++deg[v];
  }
  Matrix x(n, 2);
  const double denom = n > 1 ? static_cast<double>(n - 1) : 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    x(i, 0) = 1.0;
    x(i, 1) = static_cast<double>(deg[i]) / denom;
  }
  return x;
}

}  // namespace synth

/// Structure of one instance before edge removal, for a given node count.
inline std::vector<Edge> generate_structure(GeneratorKind kind, std::size_t n, const SynthConfig& cfg, Rng& rng) {
  const auto& fam = cfg.family;
  switch (kind) {
    case GeneratorKind::WattsStrogatz:
      return synth::watts_strogatz(n, fam.ring_degree, rng.uniform(cfg.p_range[0], cfg.p_range[1]), rng);
    case GeneratorKind::Tree:
      return synth::full_tree(n, static_cast<std::size_t>(rng.integer(cfg.branch_range[0], cfg.branch_range[1])));
    case GeneratorKind::ErdosRenyi:
      return synth::erdos_renyi(n, rng.uniform(cfg.er_p_range[0], cfg.er_p_range[1]), rng);
    case GeneratorKind::Barbell:
      return synth::barbell(
          n, static_cast<std::size_t>(std::floor(fam.barbell_clique_fraction * static_cast<double>(n))));
    case GeneratorKind::Bipartite:
      return synth::random_bipartite(n, rng.uniform(cfg.p_range[0], cfg.p_range[1]), rng);
    case GeneratorKind::BarabasiAlbert: {
      const double p = rng.uniform(cfg.p_range[0], cfg.p_range[1]);
      return synth::barabasi_albert(n, static_cast<std::size_t>(std::ceil(fam.ba_attachment_scale * p)), rng);
    }
    case GeneratorKind::Path:
      return synth::path_graph(n);
  }
  throw ConfigError("unknown generator kind");
}

/// Draws one labeled instance of `kind`: size, structure, edge removal, features.
inline GraphInstance gen_instance(GeneratorKind kind, const SynthConfig& cfg, Rng& rng) {
  GraphInstance g;
  g.n = static_cast<std::size_t>(rng.integer(cfg.n_range[0], cfg.n_range[1]));
  auto edges = canonical_edges(generate_structure(kind, g.n, cfg, rng));
  const double fraction = rng.uniform(cfg.removal_range[0], cfg.removal_range[1]);
  g.edges = synth::remove_fraction(std::move(edges), fraction, rng);
  g.features = synth::degree_features(g.n, g.edges);
  g.label = class_of(kind);
  g.generator_tag = std::string(generator_name(kind));
  return g;
}

struct Skeleton {
  std::vector<Edge> edges;
  std::vector<int> classes;  // per node
};

/// Reads whitespace-separated "u v" pairs; ids are re-indexed to 0..k-1 in
/// ascending order of the original ids. '#' starts a comment.
inline std::pair<std::size_t, std::vector<Edge>> read_edge_list(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open skeleton file '" + path + "'");
  std::vector<std::pair<long long, long long>> raw;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream ss(line);
    long long u, v;
    if (!(ss >> u)) continue;
    if (!(ss >> v)) throw ParseError(path + ": line " + std::to_string(lineno) + ": expected two node ids");
    std::string extra;
    if (ss >> extra) throw ParseError(path + ": line " + std::to_string(lineno) + ": trailing content");
    raw.emplace_back(u, v);
  }
  std::map<long long, std::size_t> index;
  for (const auto& [u, v] : raw) {
    index.emplace(u, 0);
    index.emplace(v, 0);
  }
  std::size_t next = 0;
  for (auto& [id, idx] : index) idx = next++;
  std::vector<Edge> edges;
  for (const auto& [u, v] : raw) edges.emplace_back(index[u], index[v]);
  return {index.size(), canonical_edges(std::move(edges))};
}

/// Assigns class blocks along a breadth-first order so neighboring nodes
/// tend to share a class.
inline std::vector<int> assign_classes_bfs(std::size_t n, const std::vector<Edge>& edges,
                                           const std::vector<int>& counts) {
  std::vector<std::vector<std::size_t>> nbrs(n);
  for (const auto& [u, v] : edges) {
    nbrs[u].push_back(v);
    nbrs[v].push_back(u);
  }
  std::vector<std::size_t> order;
  std::vector<bool> seen(n, false);
  for (std::size_t s = 0; s < n; ++s) {
    if (seen[s]) continue;
    std::queue<std::size_t> q;
    q.push(s);
    seen[s] = true;
    while (!q.empty()) {
      const std::size_t u = q.front();
      q.pop();
      order.push_back(u);
      for (std::size_t v : nbrs[u])
        if (!seen[v]) {
          seen[v] = true;
          q.push(v);
        }
    }
  }
  std::vector<int> classes(n, 0);
  std::size_t pos = 0;
  for (int c = 0; c < static_cast<int>(counts.size()); ++c)
    for (int k = 0; k < counts[c]; ++k) classes[order[pos++]] = c;
  return classes;
}

/// Random skeleton with the configured class sizes: |E| = round(N * mean_degree / 2)
/// edges, each joining two same-class nodes with probability `homophily`.
inline Skeleton fallback_skeleton(const SynthConfig& cfg, Rng& rng) {
  const std::size_t n = cfg.total_instances();
  Skeleton sk;
  sk.classes.reserve(n);
  for (int c = 0; c < static_cast<int>(cfg.class_counts.size()); ++c)
    sk.classes.insert(sk.classes.end(), static_cast<std::size_t>(cfg.class_counts[c]), c);
  rng.shuffle(sk.classes);
  if (n < 2) return sk;

  std::vector<std::vector<std::size_t>> members(cfg.class_counts.size());
  for (std::size_t i = 0; i < n; ++i) members[sk.classes[i]].push_back(i);

  const auto target = static_cast<std::size_t>(std::llround(static_cast<double>(n) * cfg.skeleton_mean_degree / 2.0));
  const std::size_t max_edges = n * (n - 1) / 2;
  std::set<Edge> edges;
  std::size_t attempts = 0;
  while (edges.size() < std::min(target, max_edges) && attempts < 100 * target + 1000) {
    ++attempts;
    const std::size_t u = rng.below(n);
    const auto& same = members[sk.classes[u]];
    std::size_t v;
    if (rng.bernoulli(cfg.skeleton_homophily) && same.size() > 1) {
      v = same[rng.below(same.size())];
    } else {
      v = rng.below(n);
    }
    synth::add_edge(edges, u, v);
  }
  sk.edges.assign(edges.begin(), edges.end());
  return sk;
}

inline Skeleton build_skeleton(const SynthConfig& cfg, Rng& rng) {
  cfg.check();
  if (cfg.skeleton_path.empty()) return fallback_skeleton(cfg, rng);
  auto [n, edges] = read_edge_list(cfg.skeleton_path);
  if (n != cfg.total_instances()) {
    throw ConfigError("skeleton file has " + std::to_string(n) + " nodes but class_counts sum to " +
                      std::to_string(cfg.total_instances()));
  }
  Skeleton sk;
  sk.classes = assign_classes_bfs(n, edges, cfg.class_counts);
  sk.edges = std::move(edges);
  return sk;
}

/// Full benchmark: one generated instance per skeleton node, skeleton edges as
/// the hierarchy, and a random labeled/test/unlabeled split.
inline HierarchicalGraph synthesize_dataset(const SynthConfig& cfg) {
  cfg.check();
  Rng skeleton_rng(mix_seed(cfg.seed, 0x5eed'0001));
  Skeleton sk = build_skeleton(cfg, skeleton_rng);
  const std::size_t n = sk.classes.size();
  if (cfg.num_labeled + cfg.num_test > n) {
    throw ConfigError("num_labeled + num_test exceeds the number of instances (" + std::to_string(n) + ")");
  }

  HierarchicalGraph h;
  h.num_classes = kNumGeneratorKinds;
  h.instances.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    // Per-instance streams keep each instance independent of generation order.
    Rng rng(mix_seed(cfg.seed, 0x1000'0000ULL + i));
    GraphInstance g = gen_instance(kind_of_class(sk.classes[i]), cfg, rng);
    g.id = static_cast<long long>(i);
    h.instances.push_back(std::move(g));
  }
  h.hier_edges = std::move(sk.edges);

  Rng split_rng(mix_seed(cfg.seed, 0x5eed'0002));
  auto order = split_rng.permutation(n);
  h.labeled_ids.assign(order.begin(), order.begin() + cfg.num_labeled);
  h.test_ids.assign(order.begin() + cfg.num_labeled, order.begin() + cfg.num_labeled + cfg.num_test);
  h.unlabeled_ids.assign(order.begin() + cfg.num_labeled + cfg.num_test, order.end());
  for (auto* ids : {&h.labeled_ids, &h.unlabeled_ids, &h.test_ids}) std::sort(ids->begin(), ids->end());
  return h;
}

struct ClassStats {
  int class_index = 0;
  std::size_t count = 0;
  double mean_nodes = 0.0;
  double mean_edges = 0.0;
  double mean_density = 0.0;
};

/// Per-class averages over all labeled-by-generation instances; classes with
/// no instances are omitted. Density is 2|E| / (n(n-1)), averaged per instance.
inline std::vector<ClassStats> instance_stats(const HierarchicalGraph& h) {
  std::vector<ClassStats> stats(static_cast<std::size_t>(std::max(h.num_classes, 0)));
  for (int c = 0; c < h.num_classes; ++c) stats[c].class_index = c;
  for (const GraphInstance& g : h.instances) {
    if (!g.label) continue;
    ClassStats& s = stats[*g.label];
    ++s.count;
    s.mean_nodes += static_cast<double>(g.n);
    s.mean_edges += static_cast<double>(g.edges.size());
    s.mean_density += g.density();
  }
  std::vector<ClassStats> out;
  for (ClassStats& s : stats) {
    if (s.count == 0) continue;
    const double k = static_cast<double>(s.count);
    s.mean_nodes /= k;
    s.mean_edges /= k;
    s.mean_density /= k;
    out.push_back(s);
  }
  return out;
}

inline std::string stats_csv(const std::vector<ClassStats>& stats) {
  std::string out = "class,count,mean_nodes,mean_edges,mean_density\n";
  char buf[160];
  for (const ClassStats& s : stats) {
    std::snprintf(buf, sizeof buf, "%d,%zu,%.6f,%.6f,%.6f\n", s.class_index, s.count, s.mean_nodes, s.mean_edges,
                  s.mean_density);
    out += buf;
  }
  return out;
}

}  // namespace seal
