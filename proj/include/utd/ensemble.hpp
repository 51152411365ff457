#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "utd/errors.hpp"
#include "utd/io.hpp"
#include "utd/schedule.hpp"
#include "utd/series.hpp"
#include "utd/types.hpp"

namespace utd {

enum class Direction { forward, reverse };
enum class InitMode { data, noise, uturn_state };

inline std::string to_string(Direction d) { return d == Direction::forward ? "forward" : "reverse"; }

inline std::string to_string(InitMode m) {
  switch (m) {
    case InitMode::data: return "data";
    case InitMode::noise: return "noise";
    case InitMode::uturn_state: return "uturn_state";
  }
  return "unknown";
}

// M trajectories of dimension d observed at record_steps.
struct PathEnsemble {
  Direction direction = Direction::forward;
  InitMode init_mode = InitMode::data;
  std::vector<int> record_steps;  // strictly increasing
  std::vector<Matrix> values;     // one M x d matrix per recorded step
  std::uint64_t seed = 0;
  ScheduleSpec schedule;
  std::vector<Eigen::Index> excluded;  // samples dropped during simulation (reverse only)

  Eigen::Index samples() const { return values.empty() ? 0 : values.front().rows(); }
  Eigen::Index dim() const { return values.empty() ? 0 : values.front().cols(); }

  bool has_step(int n) const { return std::binary_search(record_steps.begin(), record_steps.end(), n); }

  const Matrix& at_step(int n) const {
    auto it = std::lower_bound(record_steps.begin(), record_steps.end(), n);
    if (it == record_steps.end() || *it != n) throw ArgumentError("step " + std::to_string(n) + " was not recorded");
    return values[static_cast<std::size_t>(it - record_steps.begin())];
  }
};

// Validates and sorts-checks a record list against [0, max_step].
inline void check_record_steps(const std::vector<int>& steps, int max_step) {
  if (steps.empty()) throw ArgumentError("record_steps must not be empty");
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (steps[i] < 0 || steps[i] > max_step)
      throw RangeError("record step " + std::to_string(steps[i]) + " outside [0, " + std::to_string(max_step) + "]");
    if (i && steps[i] <= steps[i - 1]) throw ArgumentError("record_steps must be strictly increasing");
  }
}

// Evenly spaced grid 0, k, 2k, ... with the end point always included.
inline std::vector<int> step_grid(int last, int count) {
  std::vector<int> steps;
  for (int i = 0; i <= count; ++i) {
    const int n = static_cast<int>(std::lround(static_cast<double>(last) * i / count));
    if (steps.empty() || n > steps.back()) steps.push_back(n);
  }
  return steps;
}

// Dimension- and sample-averaged correlation estimator
//   C(n) = sum_i <x_i(anchor), x_i(n)> / sum_i |x_i(anchor)|^2
// with delta-method standard errors from the per-sample contributions.
inline DiagnosticSeries empirical_autocorr(const PathEnsemble& ensemble, int anchor_step, const std::vector<int>& steps) {
  const Matrix& anchor = ensemble.at_step(anchor_step);
  const auto M = anchor.rows();
  const double d = static_cast<double>(anchor.cols());
  const Vector denom_terms = anchor.rowwise().squaredNorm() / d;
  const double denom = denom_terms.mean();
  if (!(denom > 0.0)) throw ArgumentError("anchor states have zero second moment");
  DiagnosticSeries out;
  out.name = "autocorr_anchor_" + std::to_string(anchor_step);
  out.metadata["direction"] = to_string(ensemble.direction);
  out.metadata["anchor"] = std::to_string(anchor_step);
  out.metadata["M"] = std::to_string(M);
  out.metadata["schedule"] = to_string(ensemble.schedule.kind);
  out.metadata["estimator"] = "dimension_sample_average";
  if (M < 2) out.metadata["stderr_undefined"] = "true";
  for (int n : steps) {
    const Matrix& x = ensemble.at_step(n);
    const Vector num_terms = (anchor.cwiseProduct(x)).rowwise().sum() / d;
    const double value = n == anchor_step ? 1.0 : num_terms.mean() / denom;
    double se = std::numeric_limits<double>::quiet_NaN();
    if (M >= 2) {
      const Vector resid = num_terms - value * denom_terms;
      se = std::sqrt(resid.squaredNorm() / (static_cast<double>(M) * static_cast<double>(M - 1))) / denom;
    }
    out.push(n, value, se);
  }
  return out;
}

inline nlohmann::json schedule_to_json(const ScheduleSpec& s) {
  return {{"kind", to_string(s.kind)}, {"b1", s.b1}, {"b2", s.b2}, {"N", s.steps}, {"delta", s.delta}};
}

inline ScheduleSpec schedule_from_json(const nlohmann::json& j) {
  ScheduleSpec s;
  s.kind = schedule_kind_from_string(j.value("kind", std::string("linear")));
  s.b1 = j.value("b1", s.b1);
  s.b2 = j.value("b2", s.b2);
  s.steps = j.value("N", s.steps);
  s.delta = j.value("delta", s.delta);
  return s;
}

// Writes <stem>.bin (M rows, |steps| * d columns, step-major per row) and
// <stem>.json describing the layout and provenance.
inline void save_ensemble(const std::string& stem, const PathEnsemble& e) {
  const auto M = e.samples(), d = e.dim();
  const auto S = static_cast<Eigen::Index>(e.record_steps.size());
  Matrix flat(M, S * d);
  for (Eigen::Index s = 0; s < S; ++s) flat.middleCols(s * d, d) = e.values[static_cast<std::size_t>(s)];
  io::save_binary(stem + ".bin", flat);
  nlohmann::json side{{"direction", to_string(e.direction)},
                      {"init_mode", to_string(e.init_mode)},
                      {"record_steps", e.record_steps},
                      {"seed", e.seed},
                      {"samples", M},
                      {"dim", d},
                      {"excluded", e.excluded},
                      {"schedule", schedule_to_json(e.schedule)}};
  std::ofstream out(stem + ".json");
  if (!out) throw LoadError("cannot write '" + stem + ".json'");
  out << side.dump(2) << '\n';
}

inline PathEnsemble load_ensemble(const std::string& stem) {
  std::ifstream in(stem + ".json");
  if (!in) throw LoadError("cannot open '" + stem + ".json'");
  nlohmann::json side;
  try {
    side = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& ex) {
    throw LoadError(stem + ".json: " + ex.what());
  }
  PathEnsemble e;
  e.direction = side.at("direction").get<std::string>() == "reverse" ? Direction::reverse : Direction::forward;
  const auto init = side.at("init_mode").get<std::string>();
  e.init_mode = init == "noise" ? InitMode::noise : init == "uturn_state" ? InitMode::uturn_state : InitMode::data;
  e.record_steps = side.at("record_steps").get<std::vector<int>>();
  e.seed = side.at("seed").get<std::uint64_t>();
  e.schedule = schedule_from_json(side.at("schedule"));
  e.excluded = side.value("excluded", std::vector<Eigen::Index>{});
  const auto d = side.at("dim").get<Eigen::Index>();
  const Matrix flat = io::load_binary(stem + ".bin");
  const auto S = static_cast<Eigen::Index>(e.record_steps.size());
  if (flat.cols() != S * d) throw LoadError(stem + ": column count does not match sidecar");
  for (Eigen::Index s = 0; s < S; ++s) e.values.emplace_back(flat.middleCols(s * d, d));
  return e;
}

}  // namespace utd
