#pragma once

#include <cmath>
#include <vector>

#include "utd/ensemble.hpp"
#include "utd/errors.hpp"
#include "utd/parallel.hpp"
#include "utd/rng.hpp"
#include "utd/schedule.hpp"
#include "utd/series.hpp"
#include "utd/types.hpp"

namespace utd {

// One step of the discrete VP chain with an explicit rate and noise draw:
// sqrt(1 - b) x + sqrt(b) z.
inline Vector kernel_step(const Vector& x_prev, double rate, const Vector& z) {
  return std::sqrt(1.0 - rate) * x_prev + std::sqrt(rate) * z;
}

inline Vector step_kernel_sample(const Vector& x_prev, int n, const Schedule& schedule, Engine& rng) {
  if (n < 1 || n > schedule.steps()) throw RangeError("forward step needs 1 <= n <= N");
  return kernel_step(x_prev, schedule.beta(n), standard_normal_vector(rng, x_prev.size()));
}

// Exact draw from p(x_n | x_0) = N(sqrt(Phi) x0, (1 - Phi) I).
inline Vector jump_sample(const Vector& x0, int n, const Schedule& schedule, Engine& rng) {
  const double phi = schedule.phi(n, 0);
  if (n == 0) return x0;
  return std::sqrt(phi) * x0 + std::sqrt(1.0 - phi) * standard_normal_vector(rng, x0.size());
}

// Chained forward simulation of every row of `initial`. Sample i draws all
// of its noise from the stream (seed, forward, i).
inline PathEnsemble simulate_forward(const Matrix& initial, const Schedule& schedule, const std::vector<int>& record_steps,
                                     std::uint64_t seed) {
  check_record_steps(record_steps, schedule.steps());
  const auto M = initial.rows(), d = initial.cols();
  PathEnsemble out;
  out.direction = Direction::forward;
  out.init_mode = InitMode::data;
  out.record_steps = record_steps;
  out.seed = seed;
  out.schedule = schedule.spec();
  out.values.assign(record_steps.size(), Matrix(M, d));
  const int last = record_steps.back();
  std::vector<double> mean_coeff(static_cast<std::size_t>(last) + 1), noise_coeff(static_cast<std::size_t>(last) + 1);
  for (int n = 1; n <= last; ++n) {
    mean_coeff[n] = std::sqrt(1.0 - schedule.beta(n));
    noise_coeff[n] = std::sqrt(schedule.beta(n));
  }
  for_each_block(static_cast<std::size_t>(M), kBlockSize, [&](std::size_t begin, std::size_t end) {
    Vector x(d), z(d);
    for (std::size_t i = begin; i < end; ++i) {
      const auto row = static_cast<Eigen::Index>(i);
      Engine rng = make_engine(seed, Stream::forward, i);
      std::normal_distribution<double> normal(0.0, 1.0);
      x = initial.row(row).transpose();
      std::size_t next = 0;
      if (record_steps[0] == 0) out.values[next++].row(row) = x.transpose();
      for (int n = 1; n <= last; ++n) {
        for (Eigen::Index j = 0; j < d; ++j) z[j] = normal(rng);
        x = mean_coeff[n] * x + noise_coeff[n] * z;
        if (next < record_steps.size() && record_steps[next] == n) out.values[next++].row(row) = x.transpose();
      }
    }
  });
  return out;
}

enum class AutocorrAnchor { from_zero, from_T };

// Closed-form forward correlations. from_zero: C_0(n) = sqrt(Phi(n,0)).
// from_T: C_T(n) = sqrt(Phi(N,n)) E[x_n^2] / E[x_N^2], with
// E[x_n^2] = Phi(n,0) (E[x_0^2] - 1) + 1.
inline DiagnosticSeries forward_autocorr_closed_form(const Schedule& schedule, AutocorrAnchor mode,
                                                     double initial_second_moment = 1.0) {
  const int N = schedule.steps();
  auto second_moment = [&](int n) { return schedule.phi(n, 0) * (initial_second_moment - 1.0) + 1.0; };
  DiagnosticSeries out;
  out.name = mode == AutocorrAnchor::from_zero ? "C0_closed_form" : "CT_closed_form";
  out.metadata["schedule"] = to_string(schedule.kind());
  out.metadata["estimator"] = "closed_form";
  for (int n = 0; n <= N; ++n) {
    const double v = mode == AutocorrAnchor::from_zero
                         ? std::sqrt(schedule.phi(n, 0))
                         : std::sqrt(schedule.phi(N, n)) * second_moment(n) / second_moment(N);
    out.push(n, v, 0.0);
  }
  return out;
}

}  // namespace utd
