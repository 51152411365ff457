#include <gtest/gtest.h>

#include <sstream>

#include "utd/data.hpp"
#include "utd/uturn.hpp"

using namespace utd;

namespace {

const GaussianMixtureSpec kSpec = GaussianMixtureSpec::normalized_two_component(2, 0.35, 0.15);

Dataset identity_normalized(const Matrix& x) {
  Dataset d;
  d.name = "gm";
  d.samples = x;
  d.normalization.shift = Vector::Zero(x.cols());
  d.normalization.scale = Vector::Ones(x.cols());
  return d;
}

}  // namespace

TEST(UTurn, SingleStepStaysClose) {
  const Schedule s({ScheduleKind::linear});
  const GaussianMixtureScore score(kSpec, s);
  const Dataset data = identity_normalized(generate(kSpec, 500, 1).samples);
  const UTurnSamples u = uturn_generate(data, s, score, 1, 500, 2);
  ASSERT_EQ(u.synthetic.rows(), 500);
  EXPECT_EQ(u.originals, data.samples);
  const double rms = std::sqrt((u.synthetic - u.originals).squaredNorm() / 500.0);
  EXPECT_LT(rms, 2 * std::sqrt(s.beta(1)) * std::sqrt(2.0));
  EXPECT_GT(pairing_rank_correlation(u.originals, u.synthetic), 0.99);
}

TEST(UTurn, ArgumentChecks) {
  const Schedule s({ScheduleKind::linear});
  const GaussianMixtureScore score(kSpec, s);
  const Matrix x = generate(kSpec, 50, 1).samples;
  const Dataset data = identity_normalized(x);
  EXPECT_THROW(uturn_generate(data, s, score, 0, 10, 1), RangeError);
  EXPECT_THROW(uturn_generate(data, s, score, 1001, 10, 1), RangeError);
  EXPECT_THROW(uturn_generate(data, s, score, 10, 51, 1), ArgumentError);
  Dataset raw;
  raw.samples = x;
  EXPECT_THROW(uturn_generate(raw, s, score, 10, 10, 1), ArgumentError);
  const GaussianMixtureScore wrong(GaussianMixtureSpec::standard_normal(3), s);
  EXPECT_THROW(uturn_generate(data, s, wrong, 10, 10, 1), ArgumentError);
}

TEST(UTurn, Deterministic) {
  const Schedule s({ScheduleKind::sigmoid});
  const GaussianMixtureScore score(kSpec, s);
  const Dataset data = identity_normalized(generate(kSpec, 300, 1).samples);
  EXPECT_EQ(uturn_generate(data, s, score, 400, 300, 9).synthetic, uturn_generate(data, s, score, 400, 300, 9).synthetic);
}

TEST(Pairing, RanksAndCorrelation) {
  Vector v(5);
  v << 3.0, 1.0, 3.0, 2.0, 5.0;
  EXPECT_EQ(detail::ranks(v), (std::vector<double>{3.5, 1.0, 3.5, 2.0, 5.0}));
  Matrix a(4, 1), b(4, 1);
  a << 1, 2, 3, 4;
  b << 10, 20, 30, 400;
  EXPECT_DOUBLE_EQ(pairing_rank_correlation(a, b), 1.0);
  EXPECT_DOUBLE_EQ(pairing_rank_correlation(a, -b), -1.0);
  EXPECT_THROW(pairing_rank_correlation(a.topRows(2), b.topRows(2)), ArgumentError);
  EXPECT_THROW(pairing_rank_correlation(a, Matrix(4, 2)), ArgumentError);
}

TEST(Knee, ExactHinge) {
  std::vector<int> t;
  std::vector<double> y;
  for (int i = 0; i <= 12; ++i) {
    t.push_back(10 * i);
    y.push_back(i <= 7 ? 1.0 : 1.0 + 3.0 * (i - 7));
  }
  EXPECT_EQ(detect_knee(t, y), 70);
}

TEST(Knee, NoKneeCases) {
  EXPECT_EQ(detect_knee({1, 2, 3, 4, 5}, {2, 4, 6, 8, 10}), std::nullopt);
  EXPECT_EQ(detect_knee({1, 2, 3}, {0, 0, 5}), std::nullopt);
  // small wiggle around a line: the hinge buys little
  EXPECT_EQ(detect_knee({1, 2, 3, 4, 5, 6}, {1.0, 2.1, 2.9, 4.1, 4.9, 6.0}), std::nullopt);
  EXPECT_THROW(detect_knee({1, 2}, {1.0}), ArgumentError);
}

TEST(TurnGrid, Default) {
  const auto g = default_turn_grid(1000);
  ASSERT_EQ(g.size(), 13u);
  EXPECT_EQ(g.front(), 77);
  EXPECT_EQ(g[5], 462);
  EXPECT_EQ(g.back(), 1000);
  EXPECT_EQ(default_turn_grid(1), std::vector<int>{1});
}

TEST(Holdout, OverlapRejected) {
  const Matrix x = generate(kSpec, 40, 1).samples;
  EXPECT_NO_THROW(check_disjoint(x.topRows(20), x.bottomRows(20)));
  EXPECT_THROW(check_disjoint(x.topRows(21), x.bottomRows(20)), ValidationError);
}

TEST(Scan, SingleStepAndOverlap) {
  const Schedule s({ScheduleKind::linear});
  const GaussianMixtureScore score(kSpec, s);
  const Matrix all = generate(kSpec, 800, 1).samples;
  const Dataset data = identity_normalized(all.topRows(400));
  const Matrix holdout = all.bottomRows(400);
  const UTurnScan scan = uturn_scan(data, s, score, {500}, 400, 3, holdout);
  ASSERT_EQ(scan.turn_steps, std::vector<int>{500});
  EXPECT_EQ(scan.optimal_step, std::nullopt);
  EXPECT_EQ(scan.summary()["optimal_step"], "none");
  std::ostringstream csv;
  scan.write_csv(csv);
  EXPECT_EQ(csv.str().substr(0, csv.str().find('\n')), "n_u,kid_uturn,stderr_uturn,kid_noise,stderr_noise");
  EXPECT_THROW(uturn_scan(data, s, score, {500}, 400, 3, all.middleRows(399, 10)), ValidationError);
  EXPECT_THROW(uturn_scan(data, s, score, {500, 400}, 400, 3, holdout), ArgumentError);
  UTurnOptions ext;
  ext.feature.mode = FeatureMode::external_file;
  EXPECT_THROW(uturn_scan(data, s, score, {500}, 400, 3, holdout, ext), ArgumentError);
}

TEST(Scan, PairingDecaysAndArmsMeetAtN) {
  const Schedule s({ScheduleKind::linear});
  const GaussianMixtureScore score(kSpec, s);
  const Matrix all = generate(kSpec, 2000, 2).samples;
  const Dataset data = identity_normalized(all.topRows(1000));
  const UTurnScan scan = uturn_scan(data, s, score, {77, 462, 1000}, 1000, 5, all.bottomRows(1000));
  EXPECT_GT(scan.pairing[0], 0.8);
  EXPECT_GT(scan.pairing[0], scan.pairing[1]);
  EXPECT_LT(std::abs(scan.pairing[2]), 0.15);
  const KidReport& u = scan.kid_uturn[2];
  const KidReport& n = scan.kid_noise[2];
  EXPECT_LT(std::abs(u.mmd2 - n.mmd2), 3 * std::hypot(u.stderr, n.stderr) + 1e-3);
  EXPECT_GT(scan.kid_noise[0].mmd2, 5 * scan.kid_noise[0].stderr);
}
