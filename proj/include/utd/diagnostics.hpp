#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "utd/ensemble.hpp"
#include "utd/errors.hpp"
#include "utd/parallel.hpp"
#include "utd/schedule.hpp"
#include "utd/score.hpp"
#include "utd/series.hpp"
#include "utd/types.hpp"

namespace utd {

// C_{t;r}(tau) for tau <= t on a reverse ensemble; same estimator as the
// forward empirical_autocorr.
inline DiagnosticSeries reverse_autocorr(const PathEnsemble& ensemble, int anchor, const std::vector<int>& steps) {
  if (ensemble.direction != Direction::reverse) throw ArgumentError("reverse_autocorr needs a reverse ensemble");
  for (int tau : steps)
    if (tau > anchor) throw ArgumentError("reverse_autocorr steps must not exceed the anchor");
  DiagnosticSeries s = empirical_autocorr(ensemble, anchor, steps);
  s.name = "reverse_autocorr_anchor_" + std::to_string(anchor);
  return s;
}

// Reverse correlations for every recorded anchor, each over all recorded
// steps up to the anchor.
inline std::vector<DiagnosticSeries> reverse_autocorr_family(const PathEnsemble& ensemble) {
  std::vector<DiagnosticSeries> family;
  for (int anchor : ensemble.record_steps) {
    std::vector<int> steps;
    for (int tau : ensemble.record_steps)
      if (tau <= anchor) steps.push_back(tau);
    family.push_back(reverse_autocorr(ensemble, anchor, steps));
  }
  return family;
}

// Half-decay lag delta(t): C_{t;r}(t - delta) = 1/2. Each input series
// is anchored at its largest step. Scanning downward from the anchor, the
// first pair bracketing 1/2 is linearly interpolated. Anchors whose series
// never reaches 1/2 report delta = t and are listed in metadata "censored".
inline DiagnosticSeries half_decay_time(const std::vector<DiagnosticSeries>& family) {
  DiagnosticSeries out;
  out.name = "half_decay_time";
  out.metadata["estimator"] = "first_crossing_linear_interpolation";
  std::string censored;
  for (const auto& series : family) {
    if (series.size() == 0) throw ArgumentError("half_decay_time: empty series");
    std::vector<std::size_t> order(series.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return series.steps[a] > series.steps[b]; });
    const int anchor = series.steps[order.front()];
    std::optional<double> delta;
    for (std::size_t k = 1; k < order.size() && !delta; ++k) {
      const double hi = series.values[order[k - 1]], lo = series.values[order[k]];
      const double t_hi = series.steps[order[k - 1]], t_lo = series.steps[order[k]];
      if (hi > 0.5 && lo <= 0.5) {
        const double crossing = t_hi + (t_lo - t_hi) * (hi - 0.5) / (hi - lo);
        delta = anchor - crossing;
      } else if (hi == 0.5) {
        delta = anchor - t_hi;
      }
    }
    if (!delta) {
      delta = anchor;
      censored += (censored.empty() ? "" : ";") + std::to_string(anchor);
    }
    out.push(anchor, *delta, 0.0);
  }
  // present in ascending anchor order
  std::vector<std::size_t> idx(out.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return out.steps[a] < out.steps[b]; });
  DiagnosticSeries sorted{out.name, {}, {}, {}, out.metadata};
  for (auto i : idx) sorted.push(out.steps[i], out.values[i], out.stderrs[i]);
  sorted.metadata["censored"] = censored;
  return sorted;
}

struct ScoreNormCurves {
  DiagnosticSeries unweighted;  // S(n)
  DiagnosticSeries weighted;    // M(n)
};

// S(n) = sqrt(E|s_n|^2 / E|s_ref|^2) with ref = 0, or 1 for fields that are
// singular at 0; M(n) = sqrt(lambda(n) E|s_n|^2 / (lambda(N) E|s_N|^2)).
// Expectations run over the forward ensemble at each recorded step;
// standard errors propagate the numerator's sampling error only.
inline ScoreNormCurves score_norm_curves(const ScoreField& score, const PathEnsemble& ensemble, const Schedule& schedule) {
  if (ensemble.direction != Direction::forward) throw ArgumentError("score norms are taken over a forward ensemble");
  const int N = schedule.steps();
  const int ref = score.singular_at_zero() ? 1 : 0;
  std::vector<double> mean_sq, se_sq;
  for (int n : ensemble.record_steps) {
    const Matrix& x = ensemble.at_step(n);
    Vector norms(x.rows());
    for_each_block(static_cast<std::size_t>(x.rows()), kBlockSize, [&](std::size_t b, std::size_t e) {
      const auto r = static_cast<Eigen::Index>(e - b);
      norms.segment(static_cast<Eigen::Index>(b), r) =
          score.evaluate(Matrix(x.middleRows(static_cast<Eigen::Index>(b), r)), n).rowwise().squaredNorm();
    });
    const double m = norms.mean();
    const double var = x.rows() > 1 ? (norms.array() - m).square().sum() / static_cast<double>(x.rows() - 1) : 0.0;
    mean_sq.push_back(m);
    se_sq.push_back(std::sqrt(var / static_cast<double>(x.rows())));
  }
  auto index_of = [&](int n) -> std::size_t {
    auto it = std::find(ensemble.record_steps.begin(), ensemble.record_steps.end(), n);
    if (it == ensemble.record_steps.end())
      throw ArgumentError("score_norm_curves needs step " + std::to_string(n) + " recorded");
    return static_cast<std::size_t>(it - ensemble.record_steps.begin());
  };
  const double ref_sq = mean_sq[index_of(ref)];
  const double end_sq = mean_sq[index_of(N)] * schedule.lambda(N);
  if (!(ref_sq > 0.0) || !(end_sq > 0.0)) throw ArgumentError("score_norm_curves: degenerate normalisation");
  ScoreNormCurves out;
  out.unweighted.name = "score_norm_S";
  out.weighted.name = "score_norm_M";
  for (auto* s : {&out.unweighted, &out.weighted}) {
    s->metadata["schedule"] = to_string(schedule.kind());
    s->metadata["score"] = score.id();
    s->metadata["M"] = std::to_string(ensemble.samples());
  }
  out.unweighted.metadata["reference_step"] = std::to_string(ref);
  if (ref != 0) out.unweighted.metadata["reference_note"] = "n=0 replaced by n=1 for a field singular at 0";
  out.weighted.metadata["reference_step"] = std::to_string(N);
  for (std::size_t i = 0; i < ensemble.record_steps.size(); ++i) {
    const int n = ensemble.record_steps[i];
    const double s = std::sqrt(mean_sq[i] / ref_sq);
    const double s_se = mean_sq[i] > 0.0 ? 0.5 * s * se_sq[i] / mean_sq[i] : 0.0;
    out.unweighted.push(n, s, n == ref ? 0.0 : s_se);
    const double w = std::sqrt(schedule.lambda(n) * mean_sq[i] / end_sq);
    const double w_se = mean_sq[i] > 0.0 ? 0.5 * w * se_sq[i] / mean_sq[i] : 0.0;
    out.weighted.push(n, w, n == N ? 0.0 : w_se);
  }
  return out;
}

// Survival function of the limiting Kolmogorov distribution,
// P(sqrt(M) D > lambda).
inline double kolmogorov_survival(double lambda) {
  if (lambda <= 0.0) return 1.0;
  if (lambda < 1.18) {
    // theta-function form converges fast for small arguments
    const double pi = std::numbers::pi;
    const double y = -pi * pi / (8.0 * lambda * lambda);
    double cdf = 0.0;
    for (int k = 1; k <= 7; k += 2) cdf += std::exp(y * k * k);
    cdf *= std::sqrt(2.0 * pi) / lambda;
    return std::clamp(1.0 - cdf, 0.0, 1.0);
  }
  double sum = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += (k % 2 ? term : -term);
    if (term < 1e-17) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

inline double standard_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

// One-sample KS statistic sup |F_M(x) - Phi(x)| against N(0, 1).
inline double ks_statistic(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  const double M = static_cast<double>(values.size());
  double d = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double f = standard_normal_cdf(values[i]);
    d = std::max({d, (static_cast<double>(i) + 1.0) / M - f, f - static_cast<double>(i) / M});
  }
  return d;
}

inline constexpr Eigen::Index kMinKsSamples = 25;

// Fraction of coordinates whose marginal fails the KS test against the
// standard normal at level alpha (asymptotic p-value).
inline double ks_ratio(const Matrix& samples, double alpha = 0.05) {
  if (samples.rows() < kMinKsSamples)
    throw ArgumentError("ks_ratio needs at least " + std::to_string(kMinKsSamples) + " samples");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ArgumentError("alpha must lie in (0, 1)");
  const double root_m = std::sqrt(static_cast<double>(samples.rows()));
  int rejected = 0;
  for (Eigen::Index j = 0; j < samples.cols(); ++j) {
    std::vector<double> column(static_cast<std::size_t>(samples.rows()));
    for (Eigen::Index i = 0; i < samples.rows(); ++i) column[static_cast<std::size_t>(i)] = samples(i, j);
    if (kolmogorov_survival(root_m * ks_statistic(std::move(column))) < alpha) ++rejected;
  }
  return static_cast<double>(rejected) / static_cast<double>(samples.cols());
}

// KS ratio at every recorded step of an ensemble.
inline DiagnosticSeries ks_series(const PathEnsemble& ensemble, double alpha = 0.05) {
  DiagnosticSeries out;
  out.name = "ks_ratio_" + to_string(ensemble.direction);
  out.metadata["alpha"] = format_real(alpha);
  out.metadata["reference"] = "fixed N(0,1)";
  out.metadata["M"] = std::to_string(ensemble.samples());
  for (int n : ensemble.record_steps) {
    const double r = ks_ratio(ensemble.at_step(n), alpha);
    out.push(n, r, std::sqrt(r * (1.0 - r) / static_cast<double>(ensemble.dim())));
  }
  return out;
}

// Smallest step n such that every value within [n, n + window] differs
// from the value at n by less than rel_tol relative. Only windows fully
// covered by the series are considered; std::nullopt when none qualifies.
inline std::optional<int> plateau_step(const DiagnosticSeries& series, int window = 50, double rel_tol = 0.02) {
  if (series.size() < 2 || series.steps.back() - series.steps.front() <= window)
    throw ArgumentError("plateau_step: series shorter than the window");
  for (std::size_t i = 0; i < series.size(); ++i) {
    const int start = series.steps[i];
    if (start + window > series.steps.back()) break;
    const double base = series.values[i];
    bool flat = true;
    for (std::size_t j = i + 1; j < series.size() && series.steps[j] <= start + window && flat; ++j) {
      const double change = std::abs(series.values[j] - base);
      flat = base != 0.0 ? change / std::abs(base) < rel_tol : change == 0.0;
    }
    if (flat) return start;
  }
  return std::nullopt;
}

}  // namespace utd
