#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "utd/errors.hpp"
#include "utd/series.hpp"

namespace utd {

enum class ScheduleKind { linear, sigmoid, cosine };

inline std::string to_string(ScheduleKind kind) {
  switch (kind) {
    case ScheduleKind::linear: return "linear";
    case ScheduleKind::sigmoid: return "sigmoid";
    case ScheduleKind::cosine: return "cosine";
  }
  return "unknown";
}

inline ScheduleKind schedule_kind_from_string(const std::string& s) {
  if (s == "linear") return ScheduleKind::linear;
  if (s == "sigmoid") return ScheduleKind::sigmoid;
  if (s == "cosine") return ScheduleKind::cosine;
  throw ValidationError("unknown schedule kind '" + s + "'");
}

// Parameters of a discrete noise profile b(n), n = 0..steps.
struct ScheduleSpec {
  ScheduleKind kind = ScheduleKind::linear;
  double b1 = 1e-4;
  double b2 = 0.02;
  int steps = 1000;  // N
  double delta = 1.0;

  double horizon() const { return delta * steps; }  // T = N * delta
  bool operator==(const ScheduleSpec&) const = default;
};

namespace detail {

inline double cosine_profile(int n, int steps) {
  constexpr double s = 0.008;
  const double c = std::cos((static_cast<double>(n) / steps + s) / (1.0 + s) * std::numbers::pi / 2.0);
  return c * c;
}

}  // namespace detail

// The cosine profile exactly as it appears in the commonly reproduced
// table, 1 - p(n) / (p(0) - p(n)) clipped at 0.999. It is negative for
// most n and is not a valid rate; kept only for side-by-side comparison
// with the ratio-of-consecutive form used by Schedule.
inline double printed_cosine_rate(int n, int steps) {
  const double p0 = detail::cosine_profile(0, steps);
  const double pn = detail::cosine_profile(n, steps);
  return std::min(1.0 - pn / (p0 - pn), 0.999);
}

// A discrete VP noise schedule with precomputed rates b(n) and cumulative
// attenuations Phi(n, 0) = prod_{k=1..n} (1 - b(k)). Immutable.
class Schedule {
 public:
  explicit Schedule(ScheduleSpec spec) : spec_(spec) {
    if (spec_.steps < 2) throw ValidationError("schedule needs at least 2 steps");
    if (!(spec_.delta > 0.0)) throw ValidationError("schedule delta must be positive");
    if (spec_.kind != ScheduleKind::cosine && !(spec_.b1 > 0.0 && spec_.b2 > 0.0 && spec_.b1 < 1.0 && spec_.b2 < 1.0))
      throw ValidationError("schedule rates b1, b2 must lie in (0, 1)");
    const int N = spec_.steps;
    rates_.resize(N + 1);
    for (int n = 0; n <= N; ++n) rates_[n] = raw_rate(n);
    if (spec_.kind == ScheduleKind::cosine) rates_[0] = rates_[1];
    for (int n = 0; n <= N; ++n)
      if (!(rates_[n] > 0.0 && rates_[n] < 1.0))
        throw ValidationError("schedule rate b(" + std::to_string(n) + ") outside (0, 1)");
    cumulative_.resize(N + 1);
    cumulative_[0] = 1.0;
    for (int n = 1; n <= N; ++n) cumulative_[n] = cumulative_[n - 1] * (1.0 - rates_[n]);
  }

  const ScheduleSpec& spec() const { return spec_; }
  ScheduleKind kind() const { return spec_.kind; }
  int steps() const { return spec_.steps; }

  // b(n).
  double beta(int n) const {
    check_step(n);
    return rates_[n];
  }

  // Continuous-time rate beta = b / delta.
  double continuous_beta(int n) const { return beta(n) / spec_.delta; }

  // Phi(n, m) = prod_{k=m+1..n} (1 - b(k)); 1 when n == m.
  double phi(int n, int m = 0) const {
    check_step(n);
    check_step(m);
    if (m > n) throw ArgumentError("phi(n, m) requires m <= n");
    if (m == n) return 1.0;
    return cumulative_[n] / cumulative_[m];
  }

  // exp(-integral of b) with the trapezoid rule on the integer grid; the
  // continuous-time counterpart of phi(), used as a cross-check.
  double phi_exponential(int n, int m = 0) const {
    check_step(n);
    check_step(m);
    if (m > n) throw ArgumentError("phi(n, m) requires m <= n");
    double integral = 0.0;
    for (int k = m; k < n; ++k) integral += 0.5 * (rates_[k] + rates_[k + 1]);
    return std::exp(-integral);
  }

  // DSM weight lambda(n) = 1 - Phi(n, 0).
  double lambda(int n) const { return 1.0 - phi(n, 0); }

  double mean_coefficient(int n) const { return std::sqrt(phi(n, 0)); }
  double std_coefficient(int n) const { return std::sqrt(1.0 - phi(n, 0)); }

  const std::vector<double>& rates() const { return rates_; }

 private:
  void check_step(int n) const {
    if (n < 0 || n > spec_.steps)
      throw RangeError("step " + std::to_string(n) + " outside [0, " + std::to_string(spec_.steps) + "]");
  }

  double raw_rate(int n) const {
    const double N = spec_.steps;
    switch (spec_.kind) {
      case ScheduleKind::linear:
        return (spec_.b2 - spec_.b1) * n / N + spec_.b1;
      case ScheduleKind::sigmoid:
        return (spec_.b2 - spec_.b1) / (1.0 + std::exp(-12.0 * n / N + 6.0)) + spec_.b1;
      case ScheduleKind::cosine:
        if (n == 0) return 0.0;  // replaced by b(1)
        return std::min(1.0 - detail::cosine_profile(n, spec_.steps) / detail::cosine_profile(n - 1, spec_.steps),
                        0.999);
    }
    return 0.0;
  }

  ScheduleSpec spec_;
  std::vector<double> rates_;
  std::vector<double> cumulative_;
};

// sqrt(Phi(n,0)) and sqrt(1 - Phi(n,0)) for n = 0..N.
inline std::pair<DiagnosticSeries, DiagnosticSeries> mean_std_curves(const Schedule& schedule) {
  DiagnosticSeries mean, stdev;
  mean.name = "mean_coeff";
  stdev.name = "std_coeff";
  for (int n = 0; n <= schedule.steps(); ++n) {
    mean.push(n, schedule.mean_coefficient(n));
    stdev.push(n, schedule.std_coefficient(n));
  }
  mean.metadata["schedule"] = stdev.metadata["schedule"] = to_string(schedule.kind());
  mean.metadata["estimator"] = stdev.metadata["estimator"] = "closed_form";
  return {std::move(mean), std::move(stdev)};
}

// CSV with header `n,mean_coeff,std_coeff`.
inline void write_mean_std_csv(std::ostream& out, const Schedule& schedule) {
  out << "n,mean_coeff,std_coeff\n";
  for (int n = 0; n <= schedule.steps(); ++n)
    out << n << ',' << format_real(schedule.mean_coefficient(n)) << ',' << format_real(schedule.std_coefficient(n))
        << '\n';
}

}  // namespace utd
