#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "seal/nets.hpp"
#include "support.hpp"

using namespace seal;
using Catch::Approx;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng, double scale = 1.0) {
  Matrix m(r, c);
  for (double& x : m.data) x = scale * rng.normal();
  return m;
}

ModelDims small_dims(std::size_t classes = 3) {
  ModelDims d;
  d.feature_dim = 2;
  d.gcn_hidden = 6;
  d.node_dim = 3;
  d.att_dim = 4;
  d.views = 2;
  d.hc_hidden = 5;
  d.num_classes = classes;
  return d;
}

/// Model with every weight random, including the zero-initialized outputs.
Model random_model(const ModelDims& d, std::uint64_t seed) {
  Model m = Model::initialize(d, seed);
  Rng rng(seed + 100);
  for (Parameter* p : m.parameters()) p->value = random_matrix(p->value.rows, p->value.cols, rng, 0.5);
  return m;
}

GraphInstance permuted(const GraphInstance& g, const std::vector<std::size_t>& perm) {
  // Node i of g becomes node perm[i].
  GraphInstance out = g;
  out.edges.clear();
  for (auto [u, v] : g.edges) out.edges.emplace_back(perm[u], perm[v]);
  out.edges = canonical_edges(out.edges);
  for (std::size_t i = 0; i < g.n; ++i)
    for (std::size_t c = 0; c < g.features.cols; ++c) out.features(perm[i], c) = g.features(i, c);
  return out;
}

}  // namespace

TEST_CASE("gcn layer with identity operator and weights is the identity", "[nets]") {
  Rng rng(1);
  const Matrix x = random_matrix(4, 4, rng);
  auto eye = std::make_shared<const SparseMatrix>(SparseMatrix::from_dense(Matrix::identity(4)));
  Tape tape;
  CHECK(gcn_layer(eye, tape.constant(x), tape.constant(Matrix::identity(4)), Activation::Identity).value() == x);
}

TEST_CASE("gcn layer on a single node is activation(xW)", "[nets]") {
  auto adj = std::make_shared<const SparseMatrix>(normalized_adjacency_sparse(1, {}));
  const Matrix x = Matrix::from_rows({{1.0, -2.0}});
  const Matrix w = Matrix::from_rows({{1.0, 0.5}, {1.0, 1.0}});
  Tape tape;
  CHECK(gcn_layer(adj, tape.constant(x), tape.constant(w), Activation::Relu).value() ==
        Matrix::from_rows({{0.0, 0.0}}));
  CHECK(gcn_layer(adj, tape.constant(x), tape.constant(w), Activation::Identity).value() ==
        Matrix::from_rows({{-1.0, -1.5}}));
}

TEST_CASE("gcn layer equals the dense triple product", "[nets]") {
  Rng rng(2);
  const auto g = testing::random_instance(9, 0.3, rng);
  const Matrix x = random_matrix(9, 3, rng), w = random_matrix(3, 4, rng);
  const Matrix dense = matmul(matmul(normalize_adjacency(g), x), w);
  Tape tape;
  auto adj = std::make_shared<const SparseMatrix>(normalized_adjacency_sparse(g.n, g.edges));
  const Matrix out = gcn_layer(adj, tape.constant(x), tape.constant(w), Activation::Identity).value();
  for (std::size_t k = 0; k < out.size(); ++k) CHECK(out.data[k] == Approx(dense.data[k]).margin(1e-12));
}

TEST_CASE("attention pooling over one node repeats its row", "[nets]") {
  Rng rng(3);
  Tape tape;
  const Matrix h = random_matrix(1, 3, rng);
  const auto pool = attention_pool(tape.constant(h), tape.constant(random_matrix(4, 3, rng)),
                                   tape.constant(random_matrix(2, 4, rng)));
  CHECK(pool.S.value() == Matrix(2, 1, 1.0));
  for (std::size_t k = 0; k < 2; ++k)
    for (std::size_t j = 0; j < 3; ++j) CHECK(pool.e.value()(0, k * 3 + j) == Approx(h(0, j)));
}

TEST_CASE("attention pooling of identical rows returns that row", "[nets]") {
  Rng rng(4);
  Tape tape;
  Matrix h(5, 3);
  for (std::size_t r = 0; r < 5; ++r) h.row(r)[0] = 1.5, h.row(r)[1] = -0.5, h.row(r)[2] = 2.0;
  const auto pool = attention_pool(tape.constant(h), tape.constant(random_matrix(4, 3, rng)),
                                   tape.constant(random_matrix(3, 4, rng)));
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(pool.e.value()(0, k * 3 + 0) == Approx(1.5));
    CHECK(pool.e.value()(0, k * 3 + 1) == Approx(-0.5));
    CHECK(pool.e.value()(0, k * 3 + 2) == Approx(2.0));
  }
}

TEST_CASE("instance classifier is permutation invariant", "[nets][property]") {
  Rng rng(5);
  const ModelDims d = small_dims();
  Model m = random_model(d, 5);
  for (int trial = 0; trial < 20; ++trial) {
    const auto g = testing::random_instance(6 + trial % 7, 0.3, rng);
    const auto gp = permuted(g, rng.permutation(g.n));
    Tape tape(false);
    const auto a = ic_forward(tape, prepare_instance(g), m, false, rng);
    const auto b = ic_forward(tape, prepare_instance(gp), m, false, rng);
    for (std::size_t k = 0; k < a.e.value().size(); ++k) CHECK(a.e.value().data[k] == Approx(b.e.value().data[k]).margin(1e-9));
    for (std::size_t k = 0; k < a.probs.value().size(); ++k)
      CHECK(a.probs.value().data[k] == Approx(b.probs.value().data[k]).margin(1e-9));
  }
}

TEST_CASE("embedding width does not depend on instance size", "[nets]") {
  Rng rng(6);
  Model m = Model::initialize(small_dims(), 6);
  Tape tape(false);
  const auto a = ic_forward(tape, prepare_instance(testing::random_instance(100, 0.05, rng)), m, false, rng);
  const auto b = ic_forward(tape, prepare_instance(testing::random_instance(200, 0.05, rng)), m, false, rng);
  CHECK(a.e.cols() == m.dims.embedding_dim());
  CHECK(b.e.cols() == m.dims.embedding_dim());
}

TEST_CASE("fresh model predicts uniform classes from both classifiers", "[nets]") {
  Rng rng(7);
  const auto h = testing::toy_hierarchy(6, 3, 2, 2);
  Model m = Model::initialize(small_dims(), 7);
  Tape tape(false);
  const auto prepared = prepare_all(h);
  const auto batch = prepare_batch(prepared, {0, 1, 2, 3, 4, 5});
  const auto out = ic_forward_batch(tape, batch, m, false, rng);
  for (double p : out.probs.value().data) CHECK(p == Approx(1.0 / 3));
  for (double p : hc_forward(hier_operator(h), out.E, m).value().data) CHECK(p == Approx(1.0 / 3));
}

TEST_CASE("ic_forward rejects a feature width mismatch", "[nets]") {
  Rng rng(8);
  ModelDims d = small_dims();
  d.feature_dim = 5;
  Model m = Model::initialize(d, 8);
  Tape tape;
  CHECK_THROWS_AS(ic_forward(tape, prepare_instance(testing::random_instance(4, 0.5, rng)), m, false, rng), ShapeError);
}

TEST_CASE("batched instance classifier equals the per-instance path", "[nets]") {
  Rng rng(9);
  const auto h = testing::toy_hierarchy(9, 3, 3, 3);
  ModelDims d = small_dims();
  d.head_hidden = 4;
  Model m = random_model(d, 9);
  const auto prepared = prepare_all(h);
  std::vector<std::size_t> ids{4, 0, 8, 2, 6};
  // Small blocks force several blocks per batch.
  const auto batch = prepare_batch(prepared, ids, 10);
  CHECK(batch.blocks.size() > 1);
  Tape tape(false);
  const auto out = ic_forward_batch(tape, batch, m, false, rng);
  std::vector<double> penalties;
  for (std::size_t s = 0; s < ids.size(); ++s) {
    const auto one = ic_forward(tape, prepared[ids[s]], m, false, rng);
    for (std::size_t k = 0; k < one.e.cols(); ++k) CHECK(out.E.value()(s, k) == Approx(one.e.value()(0, k)).margin(1e-12));
    for (std::size_t k = 0; k < 3; ++k) CHECK(out.probs.value()(s, k) == Approx(one.probs.value()(0, k)).margin(1e-12));
    for (std::size_t r = 0; r < batch.nodes(s); ++r) {
      for (std::size_t j = 0; j < d.node_dim; ++j)
        CHECK(out.H.value()(batch.offsets[s] + r, j) == Approx(one.H.value()(r, j)).margin(1e-12));
      for (std::size_t k = 0; k < d.views; ++k)
        CHECK(out.S.value()(batch.offsets[s] + r, k) == Approx(one.S.value()(k, r)).margin(1e-12));
    }
    penalties.push_back(attention_penalty(one.S).item());
  }
  const double mean = std::accumulate(penalties.begin(), penalties.end(), 0.0) / static_cast<double>(penalties.size());
  CHECK(attention_penalty_batch(out.S, batch.offsets).item() == Approx(mean).epsilon(1e-12));
}

TEST_CASE("hierarchy classifier without edges is a per-instance MLP", "[nets]") {
  Rng rng(10);
  auto h = testing::toy_hierarchy(5, 3, 2, 1);
  h.hier_edges.clear();
  Model m = random_model(small_dims(), 10);
  const Matrix e = random_matrix(5, m.dims.embedding_dim(), rng);
  Tape tape(false);
  const Matrix gamma = hc_forward(hier_operator(h), tape.constant(e), m).value();
  Matrix hidden = matmul(e, m.hc.V0.value);
  for (double& x : hidden.data) x = std::max(x, 0.0);
  const Matrix logits = matmul(hidden, m.hc.V1.value);
  for (std::size_t i = 0; i < 5; ++i) {
    double z = 0.0;
    for (std::size_t c = 0; c < 3; ++c) z += std::exp(logits(i, c));
    for (std::size_t c = 0; c < 3; ++c) CHECK(gamma(i, c) == Approx(std::exp(logits(i, c)) / z).epsilon(1e-12));
  }
}

TEST_CASE("hierarchy classifier rows are distributions", "[nets][property]") {
  Rng rng(11);
  const auto h = testing::toy_hierarchy(12, 4, 4, 4);
  Model m = random_model(small_dims(4), 11);
  Tape tape(false);
  const Matrix gamma = hc_forward(hier_operator(h), tape.constant(random_matrix(12, 6, rng, 3.0)), m).value();
  for (std::size_t i = 0; i < 12; ++i) {
    double s = 0.0;
    for (std::size_t c = 0; c < 4; ++c) {
      CHECK(gamma(i, c) >= 0.0);
      s += gamma(i, c);
    }
    CHECK(s == Approx(1.0).margin(1e-9));
  }
  CHECK_THROWS_AS(hc_forward(hier_operator(h), tape.constant(Matrix(3, 6)), m), ShapeError);
}

TEST_CASE("discriminators", "[nets]") {
  Rng rng(12);
  const std::vector<double> h{0.3, -1.0}, e{1.0, 2.0, -0.5};
  CHECK(disc_instance(h, e, Matrix(2, 3)) == 0.5);
  const Matrix w = random_matrix(2, 3, rng);
  double score = 0.0;
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 3; ++j) score += h[i] * w(i, j) * e[j];
  const double p = disc_instance(h, e, w);
  CHECK(p == Approx(1.0 / (1.0 + std::exp(-score))).epsilon(1e-14));
  CHECK(p > 0.0);
  CHECK(p < 1.0);
  CHECK(disc_hier(e, h, transpose(w)) == Approx(p).epsilon(1e-14));
  CHECK_THROWS_AS(disc_instance(e, h, w), ShapeError);
}

TEST_CASE("feature scaling standardizes varying columns only", "[nets]") {
  const auto h = testing::toy_hierarchy(8, 2, 2, 2);
  const FeatureScaling s = fit_feature_scaling(h);
  CHECK(s.shift[0] == 0.0);
  CHECK(s.scale[0] == 1.0);
  double sum = 0.0, sq = 0.0, count = 0.0;
  for (const auto& g : h.instances) {
    const Matrix x = s.apply(g.features);
    for (std::size_t r = 0; r < x.rows; ++r) {
      CHECK(x(r, 0) == 1.0);
      sum += x(r, 1);
      sq += x(r, 1) * x(r, 1);
      count += 1.0;
    }
  }
  CHECK(sum / count == Approx(0.0).margin(1e-12));
  CHECK(sq / count == Approx(1.0).epsilon(1e-12));
  CHECK(FeatureScaling{}.apply(h.instances[0].features) == h.instances[0].features);
}

TEST_CASE("checkpoint round-trips field-exactly", "[nets]") {
  const auto h = testing::toy_hierarchy(6, 3, 2, 2);
  ModelDims d = small_dims();
  d.head_hidden = 3;
  d.attention_penalty = true;
  Model m = random_model(d, 13);
  m.input = fit_feature_scaling(h);
  const std::string text = canonical_dump(model_to_json(m, "seal-ci"));
  Checkpoint c = model_from_json(Json::parse(text));
  CHECK(c.mode == "seal-ci");
  CHECK(c.model.dims == d);
  CHECK(c.model.input == m.input);
  auto a = m.parameters(), b = c.model.parameters();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i]->name == b[i]->name);
    CHECK(a[i]->value == b[i]->value);
  }
  CHECK(canonical_dump(model_to_json(c.model, "seal-ci")) == text);
}

TEST_CASE("malformed checkpoints are rejected", "[nets]") {
  Model m = Model::initialize(small_dims(), 14);
  SECTION("wrong format tag") {
    auto j = model_to_json(m, "seal");
    j["format"] = "other";
    CHECK_THROWS_AS(model_from_json(j), ParseError);
  }
  SECTION("future version") {
    auto j = model_to_json(m, "seal");
    j["version"] = 2;
    CHECK_THROWS_AS(model_from_json(j), VersionError);
  }
  SECTION("parameter with the wrong shape") {
    auto j = model_to_json(m, "seal");
    j["params"]["hc.V1"] = matrix_to_json(Matrix(2, 2));
    CHECK_THROWS_WITH(model_from_json(j), Catch::Matchers::ContainsSubstring("hc.V1"));
  }
  SECTION("missing parameter") {
    auto j = model_to_json(m, "seal");
    j["params"].erase("ic.W0");
    CHECK_THROWS_AS(model_from_json(j), ParseError);
  }
  SECTION("non-positive input scale") {
    auto j = model_to_json(m, "seal");
    j["input_scaling"] = {{"shift", {0.0, 0.0}}, {"scale", {1.0, 0.0}}};
    CHECK_THROWS_AS(model_from_json(j), ParseError);
  }
}
