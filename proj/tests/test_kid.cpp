#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>

#include "oracles.hpp"
#include "utd/data.hpp"
#include "utd/kid.hpp"

using namespace utd;

namespace {

Matrix gaussian(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed, double shift = 0.0) {
  Engine rng = make_engine(seed, Stream::probes);
  return (standard_normal_matrix(rng, rows, cols).array() + shift).matrix();
}

}  // namespace

TEST(Kid, MatchesBruteForce) {
  const Matrix x = gaussian(50, 3, 1), y = gaussian(40, 3, 2, 0.3);
  const double expect = oracle::mmd2_brute(x, y);
  KidOptions small_tiles;
  small_tiles.tile = 7;
  EXPECT_NEAR(kid(x, y).mmd2, expect, 1e-10);
  EXPECT_NEAR(kid(x, y, small_tiles).mmd2, expect, 1e-10);
}

TEST(Kid, SymmetricBitForBit) {
  const Matrix x = gaussian(300, 4, 3), y = gaussian(257, 4, 4);
  const KidReport a = kid(x, y), b = kid(y, x);
  EXPECT_EQ(a.mmd2, b.mmd2);
  EXPECT_EQ(a.stderr, b.stderr);
}

TEST(Kid, NullWithinThreeStandardErrors) {
  const Matrix x = gaussian(2000, 2, 5), y = gaussian(2000, 2, 6);
  const KidReport r = kid(x, y);
  EXPECT_GT(r.stderr, 0.0);
  EXPECT_LT(std::abs(r.mmd2), 3 * r.stderr);
}

TEST(Kid, DetectsShift) {
  const Matrix x = gaussian(2000, 2, 7), y = gaussian(2000, 2, 8, 0.5);
  const KidReport r = kid(x, y);
  EXPECT_GT(r.mmd2, 10 * r.stderr);
}

TEST(Kid, Errors) {
  EXPECT_THROW(kid(gaussian(10, 2, 1), gaussian(10, 3, 2)), ArgumentError);
  EXPECT_THROW(kid(gaussian(1, 2, 1), gaussian(10, 2, 2)), ArgumentError);
  KidOptions bad;
  bad.resamples = -1;
  EXPECT_THROW(kid(gaussian(10, 2, 1), gaussian(10, 2, 2), bad), ArgumentError);
}

TEST(Kid, ReportJson) {
  const KidReport r = kid(gaussian(20, 2, 1), gaussian(30, 2, 2));
  const auto j = r.to_json();
  EXPECT_EQ(j["kernel"]["degree"], 3);
  EXPECT_DOUBLE_EQ(j["kernel"]["scale"].get<double>(), 0.5);
  EXPECT_EQ(j["m_real"], 20);
  EXPECT_EQ(j["m_gen"], 30);
  EXPECT_EQ(j["bootstrap_resamples"], 10);
}

TEST(Kid, FeatureMaps) {
  const Matrix x = gaussian(200, 512, 9);
  FeatureSpec id;
  EXPECT_EQ(feature_map(x, id), x);
  FeatureSpec proj;
  proj.mode = FeatureMode::random_projection;
  proj.projection_dim = 256;
  proj.seed = 3;
  const Matrix f = feature_map(x, proj);
  ASSERT_EQ(f.cols(), 256);
  EXPECT_EQ(f, feature_map(x, proj));
  double worst = 0.0;
  for (int i = 0; i < 20; ++i) {
    const double a = (x.row(i) - x.row(i + 100)).squaredNorm();
    const double b = (f.row(i) - f.row(i + 100)).squaredNorm();
    worst = std::max(worst, std::abs(b / a - 1.0));
  }
  EXPECT_LT(worst, 0.3);
  proj.projection_dim = 0;
  EXPECT_THROW(feature_map(x, proj), ArgumentError);
}

TEST(Kid, ExternalFeatures) {
  const auto path = (std::filesystem::temp_directory_path() / "utd_kid_features.bin").string();
  const Matrix f = gaussian(12, 5, 10);
  io::save_binary(path, f);
  FeatureSpec spec;
  spec.mode = FeatureMode::external_file;
  spec.path = path;
  const Matrix loaded = feature_map(Matrix::Zero(12, 2), spec);
  EXPECT_LT((loaded - f).cwiseAbs().maxCoeff(), 1e-5);
  EXPECT_THROW(feature_map(Matrix::Zero(11, 2), spec), LoadError);
  std::filesystem::remove(path);
}
