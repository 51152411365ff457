#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "utd/errors.hpp"

namespace utd::cli {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> columns;
};

inline CsvTable read_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot read " + path.string());
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) throw LoadError(path.string() + " is empty");
  std::stringstream hs(line);
  for (std::string cell; std::getline(hs, cell, ',');) t.header.push_back(cell);
  t.columns.resize(t.header.size());
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ls(line);
    std::size_t j = 0;
    for (std::string cell; std::getline(ls, cell, ',') && j < t.columns.size(); ++j)
      t.columns[j].push_back(std::strtod(cell.c_str(), nullptr));
  }
  return t;
}

// Line chart of every non-stderr column against the first column.
inline void write_svg_plot(const std::filesystem::path& csv, const std::filesystem::path& svg) {
  const CsvTable t = read_table(csv);
  if (t.columns.size() < 2 || t.columns[0].empty()) return;
  const double W = 640, H = 400, L = 60, R = 150, T = 30, B = 40;
  const auto& xs = t.columns[0];
  double x0 = *std::min_element(xs.begin(), xs.end()), x1 = *std::max_element(xs.begin(), xs.end());
  double y0 = std::numeric_limits<double>::infinity(), y1 = -y0;
  std::vector<std::size_t> series;
  for (std::size_t j = 1; j < t.columns.size(); ++j) {
    if (t.header[j].rfind("stderr", 0) == 0) continue;
    series.push_back(j);
    for (double v : t.columns[j])
      if (std::isfinite(v)) y0 = std::min(y0, v), y1 = std::max(y1, v);
  }
  if (series.empty() || !std::isfinite(y0)) return;
  if (x1 == x0) x1 = x0 + 1;
  if (y1 == y0) y1 = y0 + 1;
  auto px = [&](double x) { return L + (W - L - R) * (x - x0) / (x1 - x0); };
  auto py = [&](double y) { return H - B - (H - T - B) * (y - y0) / (y1 - y0); };
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};
  std::ofstream out(svg);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << L << "\" y=\"18\" font-size=\"13\">" << csv.filename().string() << "</text>\n";
  out << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double xv = x0 + (x1 - x0) * k / 4, yv = y0 + (y1 - y0) * k / 4;
    out << "<text x=\"" << px(xv) << "\" y=\"" << H - B + 15 << "\" text-anchor=\"middle\">" << xv << "</text>\n";
    out << "<text x=\"" << L - 5 << "\" y=\"" << py(yv) + 4 << "\" text-anchor=\"end\">" << yv << "</text>\n";
  }
  out << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 8 << "\" text-anchor=\"middle\">" << t.header[0] << "</text>\n";
  for (std::size_t s = 0; s < series.size(); ++s) {
    const auto& ys = t.columns[series[s]];
    const char* color = colors[s % 6];
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < ys.size() && i < xs.size(); ++i)
      if (std::isfinite(ys[i])) out << px(xs[i]) << ',' << py(ys[i]) << ' ';
    out << "\"/>\n";
    out << "<text x=\"" << W - R + 10 << "\" y=\"" << T + 15 * (s + 1) << "\" fill=\"" << color << "\">"
        << t.header[series[s]] << "</text>\n";
  }
  out << "</svg>\n";
}

}  // namespace utd::cli
