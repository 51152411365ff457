#pragma once

#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "utd/errors.hpp"

namespace utd {

// Shortest round-trip decimal form; used for every CSV so reruns are
// byte-identical.
inline std::string format_real(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// A named scalar curve over step indices with per-point standard errors.
struct DiagnosticSeries {
  std::string name;
  std::vector<int> steps;
  std::vector<double> values;
  std::vector<double> stderrs;
  std::map<std::string, std::string> metadata;

  std::size_t size() const { return steps.size(); }

  void push(int step, double value, double stderr_value = 0.0) {
    steps.push_back(step);
    values.push_back(value);
    stderrs.push_back(stderr_value);
  }

  // Value at a given step; throws ArgumentError if absent.
  double at(int step) const {
    for (std::size_t i = 0; i < steps.size(); ++i)
      if (steps[i] == step) return values[i];
    throw ArgumentError("series '" + name + "' has no step " + std::to_string(step));
  }

  bool stderr_undefined() const {
    auto it = metadata.find("stderr_undefined");
    return it != metadata.end() && it->second == "true";
  }

  void validate() const {
    if (values.size() != steps.size() || stderrs.size() != steps.size())
      throw ValidationError("series '" + name + "': length mismatch");
    if (!stderr_undefined())
      for (double s : stderrs)
        if (!(s >= 0.0)) throw ValidationError("series '" + name + "': negative or NaN stderr");
  }

  // CSV with header `n,value,stderr`.
  void write_csv(std::ostream& out) const {
    out << "n,value,stderr\n";
    for (std::size_t i = 0; i < steps.size(); ++i)
      out << steps[i] << ',' << format_real(values[i]) << ',' << format_real(stderrs[i]) << '\n';
  }
};

}  // namespace utd
