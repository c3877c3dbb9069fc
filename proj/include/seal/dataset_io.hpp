#pragma once

#include <string>
#include <vector>

#include "seal/canonical_json.hpp"
#include "seal/graph.hpp"

namespace seal {

inline constexpr int kDatasetSchemaVersion = 1;

namespace detail {

inline Json edges_to_json(std::vector<Edge> edges) {
  std::sort(edges.begin(), edges.end());
  Json arr = Json::array();
  for (const auto& [u, v] : edges) arr.push_back(Json::array({u, v}));
  return arr;
}

inline Json ids_to_json(std::vector<std::size_t> ids) {
  std::sort(ids.begin(), ids.end());
  return Json(ids);
}

/// Field-path aware accessors that turn type errors into ParseErrors.
inline const Json& field(const Json& obj, const char* key, const std::string& path) {
  if (!obj.is_object()) throw ParseError(path + ": expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(path + "." + key + ": missing field");
  return *it;
}

inline long long as_integer(const Json& j, const std::string& path) {
  if (!j.is_number_integer()) throw ParseError(path + ": expected an integer");
  return j.get<long long>();
}

inline std::size_t as_index(const Json& j, const std::string& path) {
  const long long v = as_integer(j, path);
  if (v < 0) throw ParseError(path + ": expected a non-negative integer");
  return static_cast<std::size_t>(v);
}

inline double as_real(const Json& j, const std::string& path) {
  if (!j.is_number()) throw ParseError(path + ": expected a number");
  return j.get<double>();
}

inline const Json& as_array(const Json& j, const std::string& path) {
  if (!j.is_array()) throw ParseError(path + ": expected an array");
  return j;
}

inline std::vector<Edge> parse_edges(const Json& j, const std::string& path, std::size_t bound) {
  std::vector<Edge> edges;
  const Json& arr = as_array(j, path);
  edges.reserve(arr.size());
  for (std::size_t k = 0; k < arr.size(); ++k) {
    const std::string p = path + "[" + std::to_string(k) + "]";
    const Json& e = as_array(arr[k], p);
    if (e.size() != 2) throw ParseError(p + ": expected a pair");
    const std::size_t u = as_index(e[0], p + "[0]");
    const std::size_t v = as_index(e[1], p + "[1]");
    if (u >= bound || v >= bound) {
      throw ParseError(p + ": endpoint " + std::to_string(std::max(u, v)) + " out of range [0," +
                       std::to_string(bound) + ")");
    }
    if (u == v) throw ParseError(p + ": self-loop");
    edges.emplace_back(std::min(u, v), std::max(u, v));
  }
  return edges;
}

inline std::vector<std::size_t> parse_ids(const Json& j, const std::string& path) {
  std::vector<std::size_t> ids;
  const Json& arr = as_array(j, path);
  for (std::size_t k = 0; k < arr.size(); ++k) ids.push_back(as_index(arr[k], path + "[" + std::to_string(k) + "]"));
  return ids;
}

}  // namespace detail

inline Json dataset_to_json(const HierarchicalGraph& h) {
  Json instances = Json::array();
  for (const GraphInstance& g : h.instances) {
    Json features = Json::array();
    for (std::size_t r = 0; r < g.features.rows; ++r) {
      Json row = Json::array();
      for (double x : g.features.row(r)) row.push_back(x);
      features.push_back(std::move(row));
    }
    Json inst;
    inst["id"] = g.id;
    inst["n"] = g.n;
    inst["edges"] = detail::edges_to_json(g.edges);
    inst["features"] = std::move(features);
    inst["label"] = g.label ? Json(*g.label) : Json(nullptr);
    inst["generator_tag"] = g.generator_tag ? Json(*g.generator_tag) : Json(nullptr);
    instances.push_back(std::move(inst));
  }
  Json doc;
  doc["schema_version"] = kDatasetSchemaVersion;
  doc["num_classes"] = h.num_classes;
  doc["instances"] = std::move(instances);
  doc["hier_edges"] = detail::edges_to_json(h.hier_edges);
  doc["splits"] = {{"labeled", detail::ids_to_json(h.labeled_ids)},
                   {"unlabeled", detail::ids_to_json(h.unlabeled_ids)},
                   {"test", detail::ids_to_json(h.test_ids)}};
  return doc;
}

/// Canonical text: identical graphs give identical bytes.
inline std::string dataset_to_string(const HierarchicalGraph& h) { return canonical_dump(dataset_to_json(h)); }

/// Parses a dataset document; edges and split ids come back sorted.
inline HierarchicalGraph dataset_from_json(const Json& doc) {
  const std::string root = "dataset";
  const long long version = detail::as_integer(detail::field(doc, "schema_version", root), root + ".schema_version");
  if (version != kDatasetSchemaVersion) {
    throw VersionError("dataset.schema_version: unsupported version " + std::to_string(version) + " (expected " +
                       std::to_string(kDatasetSchemaVersion) + ")");
  }
  HierarchicalGraph h;
  h.num_classes = static_cast<int>(detail::as_integer(detail::field(doc, "num_classes", root), root + ".num_classes"));
  if (h.num_classes < 0) throw ParseError("dataset.num_classes: must be non-negative");

  const Json& insts = detail::as_array(detail::field(doc, "instances", root), root + ".instances");
  h.instances.reserve(insts.size());
  for (std::size_t i = 0; i < insts.size(); ++i) {
    const std::string p = root + ".instances[" + std::to_string(i) + "]";
    const Json& j = insts[i];
    GraphInstance g;
    g.id = detail::as_integer(detail::field(j, "id", p), p + ".id");
    g.n = detail::as_index(detail::field(j, "n", p), p + ".n");
    g.edges = detail::parse_edges(detail::field(j, "edges", p), p + ".edges", g.n);
    std::sort(g.edges.begin(), g.edges.end());
    const Json& feats = detail::as_array(detail::field(j, "features", p), p + ".features");
    if (feats.size() != g.n) {
      throw ParseError(p + ".features: " + std::to_string(feats.size()) + " rows, expected " + std::to_string(g.n));
    }
    const std::size_t d = g.n ? detail::as_array(feats[0], p + ".features[0]").size() : 0;
    g.features = Matrix(g.n, d);
    for (std::size_t r = 0; r < g.n; ++r) {
      const std::string rp = p + ".features[" + std::to_string(r) + "]";
      const Json& row = detail::as_array(feats[r], rp);
      if (row.size() != d) throw ParseError(rp + ": ragged feature row");
      for (std::size_t c = 0; c < d; ++c) g.features(r, c) = detail::as_real(row[c], rp + "[" + std::to_string(c) + "]");
    }
    const Json& label = detail::field(j, "label", p);
    if (!label.is_null()) {
      const long long y = detail::as_integer(label, p + ".label");
      if (y < 0 || y >= h.num_classes) {
        throw ParseError(p + ".label: " + std::to_string(y) + " outside [0," + std::to_string(h.num_classes) + ")");
      }
      g.label = static_cast<int>(y);
    }
    const Json& tag = detail::field(j, "generator_tag", p);
    if (!tag.is_null()) {
      if (!tag.is_string()) throw ParseError(p + ".generator_tag: expected a string or null");
      g.generator_tag = tag.get<std::string>();
    }
    h.instances.push_back(std::move(g));
  }
  h.hier_edges = detail::parse_edges(detail::field(doc, "hier_edges", root), root + ".hier_edges", h.instances.size());
  std::sort(h.hier_edges.begin(), h.hier_edges.end());

  const Json& splits = detail::field(doc, "splits", root);
  h.labeled_ids = detail::parse_ids(detail::field(splits, "labeled", root + ".splits"), root + ".splits.labeled");
  h.unlabeled_ids = detail::parse_ids(detail::field(splits, "unlabeled", root + ".splits"), root + ".splits.unlabeled");
  h.test_ids = detail::parse_ids(detail::field(splits, "test", root + ".splits"), root + ".splits.test");
  for (auto* ids : {&h.labeled_ids, &h.unlabeled_ids, &h.test_ids}) std::sort(ids->begin(), ids->end());

  if (auto problems = validate(h); !problems.empty()) throw ParseError("dataset: " + to_string(problems.front()));
  return h;
}

inline HierarchicalGraph dataset_from_string(const std::string& text, const std::string& what = "dataset") {
  return dataset_from_json(parse_json_text(text, what));
}

inline void save_dataset(const HierarchicalGraph& h, const std::string& path) {
  write_file_atomic(path, dataset_to_string(h));
}

inline HierarchicalGraph load_dataset(const std::string& path) {
  return dataset_from_string(read_file(path), path);
}

}  // namespace seal
