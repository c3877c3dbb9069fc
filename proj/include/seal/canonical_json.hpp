#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "seal/error.hpp"

namespace seal {

using Json = nlohmann::json;

namespace detail {

inline void dump_string(std::string& out, const std::string& s) {
  // nlohmann's escaping is already canonical for strings.
  out += Json(s).dump();
}

inline void dump_canonical(std::string& out, const Json& j) {
  switch (j.type()) {
    case Json::value_t::null:
      out += "null";
      break;
    case Json::value_t::boolean:
      out += j.get<bool>() ? "true" : "false";
      break;
    case Json::value_t::number_integer:
      out += std::to_string(j.get<long long>());
      break;
    case Json::value_t::number_unsigned:
      out += std::to_string(j.get<unsigned long long>());
      break;
    case Json::value_t::number_float: {
      const double v = j.get<double>();
      if (!std::isfinite(v)) throw Error("canonical json: non-finite number");
      char buf[40];
      std::snprintf(buf, sizeof buf, "%.17g", v);
      out += buf;
      break;
    }
    case Json::value_t::string:
      dump_string(out, j.get_ref<const std::string&>());
      break;
    case Json::value_t::array: {
      out += '[';
      bool first = true;
      for (const auto& item : j) {
        if (!first) out += ',';
        first = false;
        dump_canonical(out, item);
      }
      out += ']';
      break;
    }
    case Json::value_t::object: {
      // nlohmann::json objects are std::map backed, so iteration is key-sorted.
      out += '{';
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) out += ',';
        first = false;
        dump_string(out, it.key());
        out += ':';
        dump_canonical(out, it.value());
      }
      out += '}';
      break;
    }
    default:
      throw Error("canonical json: unsupported value type");
  }
}

}  // namespace detail

/// Compact JSON with sorted keys and 17-significant-digit floats.
inline std::string canonical_dump(const Json& j) {
  std::string out;
  detail::dump_canonical(out, j);
  out += '\n';
  return out;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Writes via a sibling temp file and rename so readers never see a partial file.
inline void write_file_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot open '" + path + "' for writing");
    out << content;
    if (!out) throw Error("write failed for '" + path + "'");
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    std::remove(tmp.c_str());
    throw Error("cannot move output into place at '" + path + "'");
  }
}

/// Parses JSON text, reporting syntax errors by line and column.
inline Json parse_json_text(const std::string& text, const std::string& what) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    std::size_t line = 1, col = 1;
    const std::size_t stop = std::min<std::size_t>(e.byte, text.size());
    for (std::size_t i = 0; i + 1 < stop; ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ParseError(what + ": line " + std::to_string(line) + ", column " + std::to_string(col) +
                     ": invalid JSON");
  }
}

}  // namespace seal
