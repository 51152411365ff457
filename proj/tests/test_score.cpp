#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "utd/forward.hpp"
#include "utd/score.hpp"

using namespace utd;

namespace {

const ScheduleKind kKinds[] = {ScheduleKind::linear, ScheduleKind::sigmoid, ScheduleKind::cosine};

GaussianMixtureSpec single(const Vector& mean, double variance) {
  GaussianMixtureSpec s;
  s.weights = Vector::Ones(1);
  s.means = mean.transpose();
  s.variances = Vector::Constant(1, variance);
  return s;
}

}  // namespace

TEST(Score, StandardNormalScoreIsMinusX) {
  const Schedule sch({ScheduleKind::cosine});
  Engine rng = make_engine(1, Stream::probes);
  for (int n : {0, 1, 400, 1000}) {
    const Vector x = standard_normal_vector(rng, 3);
    EXPECT_LT((gm_score(GaussianMixtureSpec::standard_normal(3), sch, x, n) + x).norm(), 1e-14);
  }
}

TEST(Score, ShiftedUnitGaussian) {
  const Schedule sch({ScheduleKind::linear});
  Vector mu(2);
  mu << 1.5, -0.7;
  Engine rng = make_engine(2, Stream::probes);
  for (int n : {0, 10, 500, 1000}) {
    const Vector x = standard_normal_vector(rng, 2);
    const Vector expect = -(x - std::sqrt(sch.phi(n, 0)) * mu);
    EXPECT_LT((gm_score(single(mu, 1.0), sch, x, n) - expect).norm(), 1e-13);
  }
}

TEST(Score, SymmetricMixtureVanishesAtMidpoint) {
  GaussianMixtureSpec s;
  s.weights = Vector::Constant(2, 0.5);
  s.means = Matrix(2, 2);
  s.means << 1, 1, -1, -1;
  s.variances = Vector::Constant(2, 0.2);
  const Schedule sch({ScheduleKind::sigmoid});
  for (int n : {0, 100, 1000}) EXPECT_LT(gm_score(s, sch, Vector::Zero(2), n).norm(), 1e-15);
}

TEST(Score, LogDensityMatchesDirectSum) {
  const auto spec = GaussianMixtureSpec::normalized_two_component(3, 0.35, 0.15);
  for (auto kind : kKinds) {
    const Schedule sch({kind});
    const GaussianMixtureScore score(spec, sch);
    Engine rng = make_engine(3, Stream::probes);
    for (int n : {0, 50, 500, 1000}) {
      const double phi = sch.phi(n, 0);
      const oracle::Mat means = std::sqrt(phi) * spec.means;
      const oracle::Vec var = (phi * spec.variances.array() + 1 - phi).matrix();
      for (int p = 0; p < 5; ++p) {
        const Vector x = standard_normal_vector(rng, 3);
        EXPECT_NEAR(score.log_density(x, n), oracle::gm_log_density(spec.weights, means, var, x), 1e-12);
      }
    }
  }
}

TEST(Score, GradientMatchesFiniteDifferences) {
  const auto spec = GaussianMixtureSpec::normalized_two_component(2, 0.35, 0.15);
  const double h = 1e-4;
  for (auto kind : kKinds) {
    const Schedule sch({kind});
    const GaussianMixtureScore score(spec, sch);
    Engine rng = make_engine(4, Stream::probes);
    for (int n : step_grid(1000, 9)) {
      const double phi = sch.phi(n, 0);
      const oracle::Mat means = std::sqrt(phi) * spec.means;
      const oracle::Vec var = (phi * spec.variances.array() + 1 - phi).matrix();
      for (int p = 0; p < 100; ++p) {
        const Vector x = 1.5 * standard_normal_vector(rng, 2);
        const Vector g = score.evaluate(x, n);
        Vector fd(2);
        for (int j = 0; j < 2; ++j) {
          Vector up = x, down = x;
          up[j] += h;
          down[j] -= h;
          fd[j] = (oracle::gm_log_density(spec.weights, means, var, up) - oracle::gm_log_density(spec.weights, means, var, down)) /
                  (2 * h);
        }
        EXPECT_LT((fd - g).norm() / std::max(g.norm(), 1e-3), 1e-5) << to_string(kind) << " n=" << n;
      }
    }
  }
}

TEST(Score, FarPointsStayFinite) {
  const auto spec = GaussianMixtureSpec::normalized_two_component(2, 0.35, 0.05);
  const GaussianMixtureScore score(spec, Schedule({ScheduleKind::linear}));
  Vector x = Vector::Constant(2, 80.0);
  EXPECT_TRUE(score.evaluate(x, 0).allFinite());
  EXPECT_TRUE(std::isfinite(score.log_density(x, 0)));
}

TEST(Score, BatchMatchesSingle) {
  const GaussianMixtureScore score(GaussianMixtureSpec::normalized_two_component(2, 0.4, 0.3), Schedule({ScheduleKind::cosine}));
  Engine rng = make_engine(5, Stream::probes);
  const Matrix x = standard_normal_matrix(rng, 7, 2);
  const Matrix batch = score.evaluate(x, 321);
  for (int i = 0; i < 7; ++i) EXPECT_EQ(Vector(batch.row(i).transpose()), score.evaluate(Vector(x.row(i).transpose()), 321));
  EXPECT_EQ(score.evaluate(x, 321), batch);
}

TEST(Score, DsmTargetAtConditionalMean) {
  const Schedule sch({ScheduleKind::linear});
  Vector x0(2);
  x0 << 0.3, -1.1;
  EXPECT_LT(dsm_target(std::sqrt(sch.phi(200, 0)) * x0, x0, 200, sch).norm(), 1e-15);
  EXPECT_THROW(dsm_target(x0, x0, 0, sch), RangeError);
}

TEST(Score, DsmTargetAtHorizon) {
  const Schedule sch({ScheduleKind::linear});
  Vector x0(2), xt(2);
  x0 << 3.0, -2.0;
  xt << 0.4, 0.9;
  EXPECT_LT((dsm_target(xt, x0, 1000, sch) + xt).norm(), 0.03);
}

TEST(Score, DsmTargetAveragesToMarginalScore) {
  // K = 1, sigma^2 = 1: E[target | x_t] is the marginal score; check the
  // regression identity E[(target - s(x_t)) f(x_t)] = 0 for f = x_t.
  const Schedule sch({ScheduleKind::sigmoid});
  Vector mu(2);
  mu << 0.8, -0.4;
  const auto spec = single(mu, 1.0);
  const GaussianMixtureScore score(spec, sch);
  Engine rng = make_engine(6, Stream::probes);
  const int M = 100000;
  for (int n : {50, 400}) {
    double acc = 0, acc_sq = 0;
    for (int i = 0; i < M; ++i) {
      const Vector x0 = mu + standard_normal_vector(rng, 2);
      const Vector xt = jump_sample(x0, n, sch, rng);
      const double v = (dsm_target(xt, x0, n, sch) - score.evaluate(xt, n)).dot(xt);
      acc += v;
      acc_sq += v * v;
    }
    const double mean = acc / M, se = std::sqrt((acc_sq / M - mean * mean) / M);
    EXPECT_LT(std::abs(mean), 4 * se) << n;
  }
}

TEST(Score, WeightedTargetNormEqualsDimension) {
  const Schedule sch({ScheduleKind::linear});
  Engine rng = make_engine(7, Stream::probes);
  const auto data = generate(GaussianMixtureSpec::normalized_two_component(2, 0.35, 0.15), 5000, 7).samples;
  for (int n : step_grid(1000, 20)) {
    if (n == 0) continue;
    // algebraic identity
    EXPECT_NEAR(sch.lambda(n) * 2.0 / (1.0 - sch.phi(n, 0)), 2.0, 1e-12);
    double acc = 0;
    const int M = 20000;
    for (int i = 0; i < M; ++i) {
      const Vector x0 = data.row(i % 5000).transpose();
      acc += sch.lambda(n) * dsm_target(jump_sample(x0, n, sch, rng), x0, n, sch).squaredNorm();
    }
    EXPECT_NEAR(acc / M / 2.0, 1.0, 0.05) << n;
  }
}

TEST(Score, EvaluationIsPure) {
  const GaussianMixtureScore score(GaussianMixtureSpec::normalized_two_component(4, 0.2, 0.5), Schedule({ScheduleKind::linear}));
  Vector x = Vector::LinSpaced(4, -1, 1);
  EXPECT_EQ(score.evaluate(x, 77), score.evaluate(x, 77));
}
