#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "seal/error.hpp"

namespace seal {

/// A headered CSV held as strings; enough for the numeric tables this
/// project writes (no quoting).
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw ConfigError("CSV has no column '" + name + "'");
  }

  std::vector<double> numbers(std::size_t col) const {
    std::vector<double> out;
    out.reserve(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const std::string& cell = rows[r].at(col);
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(cell, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != cell.size() || cell.empty()) {
        throw ParseError("CSV row " + std::to_string(r + 2) + ", column '" + header[col] + "': '" + cell +
                         "' is not a number");
      }
      out.push_back(v);
    }
    return out;
  }
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

inline CsvTable parse_csv(const std::string& text) {
  CsvTable t;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = split_csv_line(line);
    if (t.header.empty()) {
      t.header = std::move(cells);
      continue;
    }
    if (cells.size() != t.header.size()) {
      throw ParseError("CSV line " + std::to_string(lineno) + ": expected " + std::to_string(t.header.size()) +
                       " fields, found " + std::to_string(cells.size()));
    }
    t.rows.push_back(std::move(cells));
  }
  return t;
}

struct PlotSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
};

namespace detail {

inline std::string svg_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

inline std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

}  // namespace detail

/// One polyline on an 800x600 canvas with axes, four ticks per axis and
/// labels. Output depends only on the inputs.
inline std::string line_chart_svg(const std::vector<double>& xs, const std::vector<double>& ys, const PlotSpec& spec) {
  if (xs.empty()) throw ConfigError("plot: no data points");
  if (xs.size() != ys.size()) throw ShapeError("plot: x and y differ in length");
  for (std::size_t i = 0; i < xs.size(); ++i)
    if (!std::isfinite(xs[i]) || !std::isfinite(ys[i])) throw ConfigError("plot: non-finite value in series");

  constexpr double W = 800, H = 600, left = 80, right = 30, top = 50, bottom = 70;
  auto [xmin_it, xmax_it] = std::minmax_element(xs.begin(), xs.end());
  auto [ymin_it, ymax_it] = std::minmax_element(ys.begin(), ys.end());
  double xmin = *xmin_it, xmax = *xmax_it, ymin = *ymin_it, ymax = *ymax_it;
  if (xmax == xmin) {
    xmin -= 0.5;
    xmax += 0.5;
  }
  if (ymax == ymin) {
    ymin -= 0.5;
    ymax += 0.5;
  }
  const double pw = W - left - right, ph = H - top - bottom;
  auto px = [&](double x) { return left + (x - xmin) / (xmax - xmin) * pw; };
  auto py = [&](double y) { return top + (1.0 - (y - ymin) / (ymax - ymin)) * ph; };

  std::string s;
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"800\" height=\"600\" viewBox=\"0 0 800 600\">\n";
  s += "<rect x=\"0\" y=\"0\" width=\"800\" height=\"600\" fill=\"white\"/>\n";
  s += "<text x=\"400\" y=\"30\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"18\">" +
       detail::svg_escape(spec.title) + "</text>\n";
  const std::string x0 = detail::fmt("%.2f", left), x1 = detail::fmt("%.2f", left + pw);
  const std::string y0 = detail::fmt("%.2f", top + ph), y1 = detail::fmt("%.2f", top);
  s += "<line x1=\"" + x0 + "\" y1=\"" + y0 + "\" x2=\"" + x1 + "\" y2=\"" + y0 + "\" stroke=\"black\"/>\n";
  s += "<line x1=\"" + x0 + "\" y1=\"" + y0 + "\" x2=\"" + x0 + "\" y2=\"" + y1 + "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double fx = xmin + (xmax - xmin) * k / 4.0;
    const double fy = ymin + (ymax - ymin) * k / 4.0;
    const std::string tx = detail::fmt("%.2f", px(fx)), ty = detail::fmt("%.2f", py(fy));
    s += "<line x1=\"" + tx + "\" y1=\"" + y0 + "\" x2=\"" + tx + "\" y2=\"" + detail::fmt("%.2f", top + ph + 5) +
         "\" stroke=\"black\"/>\n";
    s += "<text x=\"" + tx + "\" y=\"" + detail::fmt("%.2f", top + ph + 22) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" + detail::fmt("%.4g", fx) +
         "</text>\n";
    s += "<line x1=\"" + detail::fmt("%.2f", left - 5) + "\" y1=\"" + ty + "\" x2=\"" + x0 + "\" y2=\"" + ty +
         "\" stroke=\"black\"/>\n";
    s += "<text x=\"" + detail::fmt("%.2f", left - 8) + "\" y=\"" + detail::fmt("%.2f", py(fy) + 4) +
         "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"12\">" + detail::fmt("%.4g", fy) + "</text>\n";
  }
  s += "<text x=\"" + detail::fmt("%.2f", left + pw / 2) + "\" y=\"" + detail::fmt("%.2f", H - 20) +
       "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">" + detail::svg_escape(spec.x_label) +
       "</text>\n";
  s += "<text x=\"20\" y=\"" + detail::fmt("%.2f", top + ph / 2) + "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
       "font-size=\"14\" transform=\"rotate(-90 20 " + detail::fmt("%.2f", top + ph / 2) + ")\">" +
       detail::svg_escape(spec.y_label) + "</text>\n";
  s += "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\" points=\"";
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) s += ' ';
    s += detail::fmt("%.2f", px(xs[i])) + "," + detail::fmt("%.2f", py(ys[i]));
  }
  s += "\"/>\n</svg>\n";
  return s;
}

}  // namespace seal
