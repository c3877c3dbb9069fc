#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>

#include "seal/dataset_io.hpp"
#include "seal/graph.hpp"
#include "support.hpp"

using namespace seal;
using Catch::Approx;

namespace {

HierarchicalGraph two_instance_graph() {
  HierarchicalGraph h;
  h.num_classes = 2;
  GraphInstance a;
  a.id = 0;
  a.n = 3;
  a.edges = {{0, 1}, {1, 2}};
  a.features = Matrix(3, 2, 1.0);
  a.label = 0;
  GraphInstance b = a;
  b.id = 1;
  b.label = 1;
  h.instances = {a, b};
  h.hier_edges = {{0, 1}};
  h.labeled_ids = {0};
  h.unlabeled_ids = {1};
  return h;
}

bool has_reason(const std::vector<Violation>& vs, const std::string& needle) {
  return std::any_of(vs.begin(), vs.end(), [&](const Violation& v) { return v.reason.find(needle) != std::string::npos; });
}

Matrix brute_force_normalized(std::size_t n, const std::vector<Edge>& edges) {
  Matrix a(n, n);
  for (std::size_t i = 0; i < n; ++i) a(i, i) = 1.0;
  for (auto [u, v] : edges) a(u, v) = a(v, u) = 1.0;
  Matrix d_inv_sqrt(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    double deg = 0.0;
    for (std::size_t j = 0; j < n; ++j) deg += a(i, j);
    d_inv_sqrt(i, i) = 1.0 / std::sqrt(deg);
  }
  return matmul(matmul(d_inv_sqrt, a), d_inv_sqrt);
}

}  // namespace

TEST_CASE("well-formed two-instance hierarchy validates", "[graph]") {
  CHECK(validate(two_instance_graph()).empty());
}

TEST_CASE("self-loop is reported", "[graph]") {
  auto h = two_instance_graph();
  h.instances[0].n = 6;
  h.instances[0].features = Matrix(6, 2, 1.0);
  h.instances[0].edges.emplace_back(5, 5);
  CHECK(has_reason(validate(h), "self-loop"));
}

TEST_CASE("labeled instance without label is reported", "[graph]") {
  auto h = two_instance_graph();
  h.instances[0].label.reset();
  CHECK(has_reason(validate(h), "missing label"));
}

TEST_CASE("validate reports structural violations", "[graph]") {
  SECTION("endpoint out of range") {
    auto h = two_instance_graph();
    h.instances[1].edges.emplace_back(0, 3);
    CHECK(has_reason(validate(h), "out of range"));
  }
  SECTION("feature rows differ from n") {
    auto h = two_instance_graph();
    h.instances[1].features = Matrix(2, 2);
    CHECK(has_reason(validate(h), "rows"));
  }
  SECTION("label outside class range") {
    auto h = two_instance_graph();
    h.instances[1].label = 2;
    CHECK(has_reason(validate(h), "outside"));
  }
  SECTION("instance in two splits") {
    auto h = two_instance_graph();
    h.unlabeled_ids = {0, 1};
    CHECK(has_reason(validate(h), "more than one split"));
  }
  SECTION("duplicate hierarchy edge") {
    auto h = two_instance_graph();
    h.hier_edges = {{0, 1}, {1, 0}};
    CHECK(has_reason(validate(h), "duplicate"));
  }
}

TEST_CASE("normalized adjacency of a single isolated node is [[1]]", "[graph]") {
  CHECK(normalize_adjacency(1, {}) == Matrix::from_rows({{1.0}}));
}

TEST_CASE("normalized adjacency of one edge is all halves", "[graph]") {
  const Matrix a = normalize_adjacency(2, {{0, 1}});
  for (double x : a.data) CHECK(x == Approx(0.5).margin(1e-15));
}

TEST_CASE("normalized adjacency matches dense brute force on random graphs", "[graph]") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const auto g = testing::random_instance(10, 0.3, rng);
    const Matrix expected = brute_force_normalized(g.n, g.edges);
    const Matrix dense = normalize_adjacency(g);
    const Matrix sparse = normalized_adjacency_sparse(g.n, g.edges).to_dense();
    for (std::size_t k = 0; k < expected.size(); ++k) {
      CHECK(dense.data[k] == Approx(expected.data[k]).margin(1e-14));
      CHECK(sparse.data[k] == Approx(expected.data[k]).margin(1e-14));
    }
  }
}

TEST_CASE("normalized adjacency is symmetric with spectral radius one", "[graph][property]") {
  Rng rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const auto g = testing::random_instance(8 + trial, 0.25, rng);
    const Matrix a = normalize_adjacency(g);
    for (std::size_t i = 0; i < g.n; ++i)
      for (std::size_t j = 0; j < g.n; ++j) CHECK(a(i, j) == Approx(a(j, i)).margin(1e-15));
    // D^{1/2} 1 is the top eigenvector with eigenvalue 1.
    const auto deg = g.degrees();
    Matrix v(g.n, 1);
    for (std::size_t i = 0; i < g.n; ++i) v(i, 0) = std::sqrt(static_cast<double>(deg[i] + 1));
    const Matrix av = matmul(a, v);
    for (std::size_t i = 0; i < g.n; ++i) CHECK(av(i, 0) == Approx(v(i, 0)).margin(1e-12));
  }
}

TEST_CASE("density of a path and of a single node", "[graph]") {
  GraphInstance g;
  g.n = 4;
  g.edges = {{0, 1}, {1, 2}, {2, 3}};
  CHECK(g.density() == Approx(0.5));
  g.n = 1;
  g.edges.clear();
  CHECK(g.density() == 0.0);
}

TEST_CASE("dataset round-trips field-exactly and byte-identically", "[dataset]") {
  auto h = testing::toy_hierarchy(6, 3, 2, 2);
  h.instances[4].label.reset();
  h.instances[2].generator_tag = "tree";
  h.instances[0].features(0, 1) = 0.1 + 0.2;  // needs all 17 digits
  const std::string text = dataset_to_string(h);
  const HierarchicalGraph back = dataset_from_string(text);
  CHECK(back == h);
  CHECK(dataset_to_string(back) == text);
}

TEST_CASE("dataset with an out-of-range edge fails to parse", "[dataset]") {
  auto j = dataset_to_json(two_instance_graph());
  j["instances"][0]["edges"].push_back({0, 3});
  CHECK_THROWS_AS(dataset_from_json(j), ParseError);
}

TEST_CASE("empty instance list is a valid dataset", "[dataset]") {
  HierarchicalGraph h;
  h.num_classes = 3;
  const HierarchicalGraph back = dataset_from_string(dataset_to_string(h));
  CHECK(back.size() == 0);
  CHECK(back.num_labeled() == 0);
  CHECK(back.num_unlabeled() == 0);
}

TEST_CASE("dataset parse errors name the offending field", "[dataset]") {
  SECTION("wrong schema version") {
    auto j = dataset_to_json(two_instance_graph());
    j["schema_version"] = 99;
    CHECK_THROWS_AS(dataset_from_json(j), VersionError);
  }
  SECTION("missing field") {
    auto j = dataset_to_json(two_instance_graph());
    j.erase("hier_edges");
    CHECK_THROWS_WITH(dataset_from_json(j), Catch::Matchers::ContainsSubstring("hier_edges"));
  }
  SECTION("ragged features") {
    auto j = dataset_to_json(two_instance_graph());
    j["instances"][1]["features"][2] = {1.0};
    CHECK_THROWS_WITH(dataset_from_json(j), Catch::Matchers::ContainsSubstring("instances[1].features[2]"));
  }
  SECTION("invalid JSON reports a position") {
    CHECK_THROWS_WITH(dataset_from_string("{\n  \"a\": ,\n}"), Catch::Matchers::ContainsSubstring("line 2"));
  }
}
