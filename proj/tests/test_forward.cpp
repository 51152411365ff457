#include <gtest/gtest.h>

#include <cmath>

#include "utd/diagnostics.hpp"
#include "utd/forward.hpp"

using namespace utd;

namespace {

const ScheduleKind kKinds[] = {ScheduleKind::linear, ScheduleKind::sigmoid, ScheduleKind::cosine};

Matrix normalized_data(Eigen::Index M, int dim, std::uint64_t seed) {
  return generate(GaussianMixtureSpec::normalized_two_component(dim, 0.35, 0.15), M, seed).samples;
}

}  // namespace

TEST(Forward, KernelWithZeroRateIsIdentity) {
  Vector x(3);
  x << 1.0, -2.0, 0.5;
  const Vector z = Vector::Constant(3, 7.0);
  EXPECT_EQ(kernel_step(x, 0.0, z), x);
}

TEST(Forward, KernelFromZeroHasVarianceRate) {
  const Schedule s({ScheduleKind::linear});
  Engine rng = make_engine(1, Stream::forward);
  const int n = 700;
  double sum = 0, sq = 0;
  const int M = 100000;
  for (int i = 0; i < M; ++i) {
    const double v = step_kernel_sample(Vector::Zero(1), n, s, rng)[0];
    sum += v;
    sq += v * v;
  }
  const double var = sq / M - (sum / M) * (sum / M);
  EXPECT_NEAR(var / s.beta(n), 1.0, 0.03);
}

TEST(Forward, KernelRangeChecked) {
  const Schedule s({ScheduleKind::linear});
  Engine rng = make_engine(1, Stream::forward);
  EXPECT_THROW(step_kernel_sample(Vector::Zero(2), 0, s, rng), RangeError);
  EXPECT_THROW(step_kernel_sample(Vector::Zero(2), 1001, s, rng), RangeError);
  EXPECT_THROW(jump_sample(Vector::Zero(2), -1, s, rng), RangeError);
}

TEST(Forward, JumpAtZeroReturnsInput) {
  const Schedule s({ScheduleKind::cosine});
  Engine rng = make_engine(2, Stream::forward);
  Vector x(2);
  x << 0.3, 0.4;
  EXPECT_EQ(jump_sample(x, 0, s, rng), x);
}

TEST(Forward, JumpMeanFollowsAttenuation) {
  const Schedule s({ScheduleKind::sigmoid});
  Engine rng = make_engine(3, Stream::forward);
  Vector x0(2);
  x0 << 1.0, -0.5;
  for (int n : {100, 400, 800}) {
    Vector mean = Vector::Zero(2);
    const int M = 20000;
    for (int i = 0; i < M; ++i) mean += jump_sample(x0, n, s, rng);
    mean /= M;
    const double sigma = s.std_coefficient(n);
    for (int j = 0; j < 2; ++j) EXPECT_NEAR(mean[j], s.mean_coefficient(n) * x0[j], 3 * sigma / std::sqrt(M));
  }
}

TEST(Forward, JumpAtHorizonLooksGaussian) {
  const Schedule s({ScheduleKind::linear});
  Engine rng = make_engine(4, Stream::forward);
  const Matrix x0 = normalized_data(10000, 64, 4);
  Matrix out(10000, 64);
  for (Eigen::Index i = 0; i < 10000; ++i) out.row(i) = jump_sample(x0.row(i).transpose(), 1000, s, rng).transpose();
  EXPECT_LE(ks_ratio(out), 7.0 / 64.0);
}

TEST(Forward, ChainedMatchesJump) {
  const Schedule s({ScheduleKind::cosine});
  const int M = 100000;
  Vector x0(1);
  x0 << 1.3;
  const std::vector<int> grid{0, 50, 300, 700, 1000};
  const PathEnsemble chained = simulate_forward(Matrix::Constant(M, 1, 1.3), s, grid, 5);
  Engine rng = make_engine(6, Stream::forward);
  for (int n : grid) {
    double jm = 0, jv = 0;
    for (int i = 0; i < M; ++i) {
      const double v = jump_sample(x0, n, s, rng)[0];
      jm += v;
      jv += v * v;
    }
    jm /= M;
    jv = jv / M - jm * jm;
    const Matrix& c = chained.at_step(n);
    const double cm = c.mean();
    const double cv = (c.array() - cm).square().mean();
    EXPECT_NEAR(cm, jm, 4.0 * std::sqrt(2.0 * std::max(jv, 0.0) / M) + 1e-9);
    EXPECT_NEAR(cv, jv, 8.0 * std::max(jv, 0.0) / std::sqrt(M) + 1e-9);
  }
}

TEST(Forward, RecordZeroReturnsData) {
  const Schedule s({ScheduleKind::linear});
  const Matrix x0 = normalized_data(50, 3, 1);
  const PathEnsemble e = simulate_forward(x0, s, {0}, 9);
  EXPECT_EQ(e.at_step(0), x0);
  EXPECT_EQ(e.direction, Direction::forward);
  EXPECT_EQ(e.init_mode, InitMode::data);
}

TEST(Forward, RecordStepsValidated) {
  const Schedule s({ScheduleKind::linear});
  const Matrix x0 = normalized_data(5, 2, 1);
  EXPECT_THROW(simulate_forward(x0, s, {}, 1), ArgumentError);
  EXPECT_THROW(simulate_forward(x0, s, {5, 3}, 1), ArgumentError);
  EXPECT_THROW(simulate_forward(x0, s, {2, 2}, 1), ArgumentError);
  EXPECT_THROW(simulate_forward(x0, s, {0, 1001}, 1), RangeError);
  const PathEnsemble e = simulate_forward(x0, s, {0, 10}, 1);
  EXPECT_THROW(e.at_step(5), ArgumentError);
}

TEST(Forward, VariancePreserved) {
  const int M = 10000;
  for (auto kind : kKinds) {
    const Schedule s({kind});
    const Matrix x0 = normalized_data(M, 2, 11);
    const double m2 = x0.squaredNorm() / static_cast<double>(x0.size());
    const auto grid = step_grid(1000, 20);
    const PathEnsemble e = simulate_forward(x0, s, grid, 12);
    for (int n : grid) {
      const double pooled = e.at_step(n).squaredNorm() / static_cast<double>(x0.size());
      EXPECT_NEAR(pooled, 1.0 - s.phi(n, 0) * (1.0 - m2), 4.0 / std::sqrt(M)) << to_string(kind) << " n=" << n;
      EXPECT_NEAR(pooled, 1.0, 4.0 / std::sqrt(M) + std::abs(1 - m2));
    }
  }
}

TEST(Forward, ClosedFormEndpoints) {
  const Schedule s({ScheduleKind::linear});
  const auto c0 = forward_autocorr_closed_form(s, AutocorrAnchor::from_zero);
  const auto cT = forward_autocorr_closed_form(s, AutocorrAnchor::from_T);
  EXPECT_EQ(c0.at(0), 1.0);
  EXPECT_EQ(cT.at(1000), 1.0);
  EXPECT_NEAR(c0.at(1000), std::sqrt(s.phi(1000, 0)), 1e-15);
  EXPECT_NEAR(c0.at(1000), 6.5e-3, 0.35e-3);
  for (int n = 0; n <= 1000; n += 100) EXPECT_NEAR(cT.at(n), std::sqrt(s.phi(1000, n)), 1e-15);
}

TEST(Forward, ClosedFormGeneralSecondMoment) {
  const Schedule s({ScheduleKind::sigmoid});
  const double m0 = 2.5;
  const auto cT = forward_autocorr_closed_form(s, AutocorrAnchor::from_T, m0);
  for (int n : {0, 300, 900}) {
    const double en = s.phi(n, 0) * (m0 - 1) + 1, eN = s.phi(1000, 0) * (m0 - 1) + 1;
    EXPECT_NEAR(cT.at(n), std::sqrt(s.phi(1000, n)) * en / eN, 1e-14);
  }
}

TEST(Forward, EmpiricalAutocorrAnchorIsOne) {
  const Schedule s({ScheduleKind::cosine});
  const PathEnsemble e = simulate_forward(normalized_data(200, 2, 1), s, {0, 100, 500, 1000}, 2);
  for (int a : {0, 100, 500, 1000}) EXPECT_EQ(empirical_autocorr(e, a, {a}).values[0], 1.0);
  EXPECT_THROW(empirical_autocorr(e, 0, {7}), ArgumentError);
}

TEST(Forward, EmpiricalAutocorrMatchesClosedForms) {
  const int M = 10000;
  for (auto kind : kKinds) {
    const Schedule s({kind});
    const auto grid = step_grid(1000, 20);
    const PathEnsemble e = simulate_forward(normalized_data(M, 2, 21), s, grid, 22);
    const auto c0 = empirical_autocorr(e, 0, grid), cT = empirical_autocorr(e, 1000, grid);
    const auto x0 = forward_autocorr_closed_form(s, AutocorrAnchor::from_zero);
    const auto xT = forward_autocorr_closed_form(s, AutocorrAnchor::from_T);
    for (std::size_t i = 0; i < grid.size(); ++i) {
      EXPECT_NEAR(c0.values[i], x0.at(grid[i]), 5.0 / std::sqrt(M)) << to_string(kind) << " n=" << grid[i];
      EXPECT_NEAR(cT.values[i], xT.at(grid[i]), 5.0 / std::sqrt(M)) << to_string(kind) << " n=" << grid[i];
      if (i) {
        EXPECT_LE(c0.values[i], c0.values[i - 1] + 3.0 / std::sqrt(M));
      }
    }
  }
}

TEST(Forward, SingleSampleStderrUndefined) {
  const Schedule s({ScheduleKind::linear});
  const PathEnsemble e = simulate_forward(Matrix::Ones(1, 2), s, {0, 10}, 1);
  const auto c = empirical_autocorr(e, 0, {0, 10});
  EXPECT_TRUE(c.stderr_undefined());
  EXPECT_TRUE(std::isnan(c.stderrs[1]));
  EXPECT_NO_THROW(c.validate());
}

TEST(Forward, StepGrid) {
  EXPECT_EQ(step_grid(1000, 4), (std::vector<int>{0, 250, 500, 750, 1000}));
  EXPECT_EQ(step_grid(3, 10), (std::vector<int>{0, 1, 2, 3}));
}
