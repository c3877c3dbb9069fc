#include <catch_amalgamated.hpp>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "seal/dataset_io.hpp"
#include "seal/synthgen.hpp"

using namespace seal;
using Catch::Approx;

namespace {

SynthConfig fixed_size(int n) {
  SynthConfig cfg;
  cfg.n_range = {n, n};
  cfg.removal_range = {0.0, 0.0};
  return cfg;
}

double mean_density(GeneratorKind kind, const SynthConfig& cfg, int draws, std::uint64_t seed) {
  Rng rng(seed);
  double total = 0.0;
  for (int i = 0; i < draws; ++i) total += gen_instance(kind, cfg, rng).density();
  return total / draws;
}

const HierarchicalGraph& default_dataset() {
  static const HierarchicalGraph h = synthesize_dataset(SynthConfig{});
  return h;
}

}  // namespace

TEST_CASE("class index and generator kind are a fixed bijection", "[synthgen]") {
  std::set<std::string_view> names;
  for (int c = 0; c < kNumGeneratorKinds; ++c) {
    CHECK(class_of(kind_of_class(c)) == c);
    names.insert(generator_name(kind_of_class(c)));
  }
  CHECK(names.size() == 7);
  CHECK(generator_name(GeneratorKind::Path) == "path");
  CHECK_THROWS_AS(kind_of_class(7), ConfigError);
}

TEST_CASE("path of 175 nodes without removal has 174 edges", "[synthgen]") {
  Rng rng(3);
  const GraphInstance g = gen_instance(GeneratorKind::Path, fixed_size(175), rng);
  CHECK(g.n == 175);
  CHECK(g.edges.size() == 174);
}

TEST_CASE("tree instances never exceed n-1 edges", "[synthgen]") {
  Rng rng(4);
  SynthConfig cfg;
  for (int i = 0; i < 50; ++i) {
    const GraphInstance g = gen_instance(GeneratorKind::Tree, cfg, rng);
    CHECK(g.edges.size() <= g.n - 1);
  }
}

TEST_CASE("Erdos-Renyi mean density is 20% within 5 points", "[synthgen]") {
  CHECK(mean_density(GeneratorKind::ErdosRenyi, SynthConfig{}, 200, 21) == Approx(0.20).margin(0.05));
}

TEST_CASE("Barbell mean density is 16.3% within 5 points", "[synthgen]") {
  CHECK(mean_density(GeneratorKind::Barbell, SynthConfig{}, 200, 22) == Approx(0.163).margin(0.05));
}

TEST_CASE("Path mean density is 1.1% within 0.5 points", "[synthgen]") {
  CHECK(mean_density(GeneratorKind::Path, SynthConfig{}, 200, 23) == Approx(0.011).margin(0.005));
}

TEST_CASE("family structure", "[synthgen]") {
  Rng rng(9);
  SECTION("full tree is connected with n-1 edges and bounded fan-out") {
    const auto edges = synth::full_tree(40, 3);
    CHECK(edges.size() == 39);
    std::array<int, 40> children{};
    for (auto [u, v] : edges) {
      CHECK(u < v);
      ++children[u];
    }
    for (int c : children) CHECK(c <= 3);
  }
  SECTION("barbell has two cliques joined by a path") {
    const auto edges = synth::barbell(20, 6);
    // 2 * C(6,2) clique edges plus the 9-edge chain from node 5 to node 14.
    CHECK(edges.size() == 2 * 15 + 9);
  }
  SECTION("bipartite edges cross the split") {
    for (auto [u, v] : synth::random_bipartite(30, 0.5, rng)) {
      CHECK(u < 15);
      CHECK(v >= 15);
    }
  }
  SECTION("Barabasi-Albert adds m edges per new node") {
    const auto edges = synth::barabasi_albert(50, 3, rng);
    CHECK(edges.size() == 3 * (50 - 3));
  }
  SECTION("Watts-Strogatz keeps the lattice edge count") {
    CHECK(synth::watts_strogatz(30, 4, 0.0, rng).size() == 60);
    CHECK(synth::watts_strogatz(30, 4, 0.3, rng).size() == 60);
  }
  SECTION("edge removal drops round(fraction * |E|) edges") {
    CHECK(synth::remove_fraction(synth::path_graph(101), 0.1, rng).size() == 90);
  }
  SECTION("degree features are [1, deg/(n-1)]") {
    const Matrix x = synth::degree_features(3, {{0, 1}, {1, 2}});
    CHECK(x == Matrix::from_rows({{1.0, 0.5}, {1.0, 1.0}, {1.0, 0.5}}));
  }
}

TEST_CASE("default dataset has 2708 instances over 7 classes", "[synthgen]") {
  const auto& h = default_dataset();
  CHECK(h.size() == 2708);
  CHECK(h.num_classes == 7);
  CHECK(h.num_labeled() == 300);
  CHECK(h.test_ids.size() == 1000);
  CHECK(h.num_unlabeled() == 1408);
  CHECK(validate(h).empty());
}

TEST_CASE("fallback skeleton reproduces the class histogram exactly", "[synthgen]") {
  const auto stats = instance_stats(default_dataset());
  REQUIRE(stats.size() == 7);
  for (int c = 0; c < 7; ++c) {
    CHECK(stats[c].count == static_cast<std::size_t>(kSkeletonClassCounts[c]));
    CHECK(stats[c].mean_nodes >= 100.0);
    CHECK(stats[c].mean_nodes <= 200.0);
  }
}

TEST_CASE("fallback skeleton hits the configured mean degree and homophily", "[synthgen]") {
  const auto& h = default_dataset();
  CHECK(static_cast<double>(2 * h.hier_edges.size()) / static_cast<double>(h.size()) == Approx(3.9).margin(0.01));
  std::size_t same = 0;
  for (auto [u, v] : h.hier_edges) same += h.instances[u].label == h.instances[v].label;
  CHECK(static_cast<double>(same) / static_cast<double>(h.hier_edges.size()) > 0.75);
}

TEST_CASE("same seed gives byte-identical datasets", "[synthgen]") {
  SynthConfig cfg;
  cfg.class_counts = {10, 10, 10, 10, 10, 10, 10};
  cfg.num_labeled = 14;
  cfg.num_test = 20;
  const std::string a = dataset_to_string(synthesize_dataset(cfg));
  CHECK(a == dataset_to_string(synthesize_dataset(cfg)));
  cfg.seed = 2;
  CHECK(a != dataset_to_string(synthesize_dataset(cfg)));
}

TEST_CASE("single-instance dataset statistics equal the instance", "[synthgen]") {
  SynthConfig cfg;
  cfg.class_counts = {0, 0, 0, 1, 0, 0, 0};
  cfg.num_labeled = 1;
  cfg.num_test = 0;
  const auto h = synthesize_dataset(cfg);
  REQUIRE(h.size() == 1);
  const auto stats = instance_stats(h);
  REQUIRE(stats.size() == 1);
  const GraphInstance& g = h.instances[0];
  CHECK(stats[0].class_index == 3);
  CHECK(stats[0].count == 1);
  CHECK(stats[0].mean_nodes == static_cast<double>(g.n));
  CHECK(stats[0].mean_edges == static_cast<double>(g.edges.size()));
  CHECK(stats[0].mean_density == g.density());
}

TEST_CASE("skeleton file drives the hierarchy and BFS class blocks", "[synthgen]") {
  const auto path = (std::filesystem::temp_directory_path() / "seal_test_skeleton.txt").string();
  {
    std::ofstream out(path);
    out << "# ring of 14 with original ids offset by 100\n";
    for (int i = 0; i < 14; ++i) out << 100 + i << " " << 100 + (i + 1) % 14 << "\n";
  }
  SynthConfig cfg;
  cfg.skeleton_path = path;
  cfg.class_counts = {2, 2, 2, 2, 2, 2, 2};
  cfg.num_labeled = 7;
  cfg.num_test = 3;
  const auto h = synthesize_dataset(cfg);
  CHECK(h.size() == 14);
  CHECK(h.hier_edges.size() == 14);
  CHECK(validate(h).empty());
  std::array<int, 7> counts{};
  for (const auto& g : h.instances) ++counts[*g.label];
  for (int c : counts) CHECK(c == 2);

  cfg.class_counts = {2, 2, 2, 2, 2, 2, 3};
  CHECK_THROWS_AS(synthesize_dataset(cfg), ConfigError);
  std::remove(path.c_str());
}

TEST_CASE("invalid synth configs are rejected", "[synthgen]") {
  SynthConfig cfg;
  cfg.n_range = {200, 100};
  CHECK_THROWS_AS(cfg.check(), ConfigError);
  cfg = {};
  cfg.class_counts = {1, 2, 3};
  CHECK_THROWS_AS(cfg.check(), ConfigError);
  cfg = {};
  cfg.num_test = 5000;
  CHECK_THROWS_AS(synthesize_dataset(cfg), ConfigError);
}
