#pragma once

#include <cstddef>
#include <vector>

#include "seal/graph.hpp"
#include "seal/rng.hpp"
#include "seal/synthgen.hpp"

namespace seal::testing {

/// Random connected-ish instance with degree features.
inline GraphInstance random_instance(std::size_t n, double p, Rng& rng, int label = 0) {
  GraphInstance g;
  g.n = n;
  for (std::size_t u = 0; u < n; ++u)
    for (std::size_t v = u + 1; v < n; ++v)
      if (v == u + 1 || rng.bernoulli(p)) g.edges.emplace_back(u, v);
  g.features = synth::degree_features(n, g.edges);
  g.label = label;
  return g;
}

/// Small labeled hierarchy: `count` instances on a ring, classes cycling
/// through `classes`, first `labeled` labeled, next `test` in the test split.
inline HierarchicalGraph toy_hierarchy(std::size_t count, int classes, std::size_t labeled, std::size_t test,
                                       std::uint64_t seed = 7) {
  Rng rng(seed);
  HierarchicalGraph h;
  h.num_classes = classes;
  for (std::size_t i = 0; i < count; ++i) {
    const int c = static_cast<int>(i % static_cast<std::size_t>(classes));
    GraphInstance g = random_instance(4 + i % 3, 0.2 + 0.25 * c, rng, c);
    g.id = static_cast<long long>(i);
    h.instances.push_back(std::move(g));
    if (count > 1) h.hier_edges.emplace_back(i, (i + 1) % count);
  }
  h.hier_edges = canonical_edges(h.hier_edges);
  for (std::size_t i = 0; i < count; ++i) {
    if (i < labeled) h.labeled_ids.push_back(i);
    else if (i < labeled + test) h.test_ids.push_back(i);
    else h.unlabeled_ids.push_back(i);
  }
  return h;
}

}  // namespace seal::testing
