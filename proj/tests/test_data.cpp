#include <gtest/gtest.h>

#include "utd/data.hpp"

using namespace utd;

TEST(Data, StandardNormalMean) {
  const Dataset d = generate(GaussianMixtureSpec::standard_normal(3), 10000, 5);
  const Vector mean = d.samples.colwise().mean();
  for (int j = 0; j < 3; ++j) EXPECT_LT(std::abs(mean[j]), 3.0 / 100.0);
}

TEST(Data, SymmetricMixtureOccupancy) {
  GaussianMixtureSpec spec;
  spec.weights = Vector::Constant(2, 0.5);
  spec.means = Matrix(2, 2);
  spec.means << -3, -3, 3, 3;
  spec.variances = Vector::Ones(2);
  const Dataset d = generate(spec, 10000, 8);
  const Vector occ = component_occupancy(spec, d.samples);
  EXPECT_NEAR(occ[0], 0.5, 0.02);
  EXPECT_NEAR(occ[1], 0.5, 0.02);
}

TEST(Data, GenerationIsDeterministic) {
  const auto spec = GaussianMixtureSpec::normalized_two_component(4, 0.3, 0.2);
  EXPECT_EQ(generate(spec, 500, 42).samples, generate(spec, 500, 42).samples);
  EXPECT_NE(generate(spec, 500, 42).samples, generate(spec, 500, 43).samples);
  for (auto b : {Builtin::two_moons, Builtin::checkerboard, Builtin::tiny_glyphs_8x8})
    EXPECT_EQ(generate(b, 300, 9).samples, generate(b, 300, 9).samples);
}

TEST(Data, BuiltinShapes) {
  EXPECT_EQ(generate(Builtin::two_moons, 100, 1).dim(), 2);
  EXPECT_EQ(generate(Builtin::checkerboard, 100, 1).dim(), 2);
  const Dataset g = generate(Builtin::tiny_glyphs_8x8, 100, 1);
  EXPECT_EQ(g.dim(), 64);
  EXPECT_TRUE(g.samples.allFinite());
  for (auto b : {Builtin::two_moons, Builtin::checkerboard, Builtin::tiny_glyphs_8x8})
    EXPECT_EQ(builtin_from_string(to_string(b)), b);
}

TEST(Data, TooFewSamples) {
  EXPECT_THROW(generate(GaussianMixtureSpec::standard_normal(2), 1, 0), ValidationError);
}

TEST(Data, SpecValidation) {
  auto spec = GaussianMixtureSpec::normalized_two_component(2, 0.4, 0.3);
  EXPECT_NO_THROW(spec.validate());
  auto bad = spec;
  bad.weights << 0.5, 0.6;
  EXPECT_THROW(bad.validate(), ValidationError);
  bad = spec;
  bad.weights << 1.0, 0.0;
  EXPECT_THROW(bad.validate(), ValidationError);
  bad = spec;
  bad.variances[1] = 0.0;
  EXPECT_THROW(bad.validate(), ValidationError);
  bad = spec;
  bad.weights = Vector::Ones(1);
  EXPECT_THROW(bad.validate(), ValidationError);
  EXPECT_THROW(generate(bad, 10, 0), ValidationError);
}

TEST(Data, NormalizedPresetMoments) {
  const auto spec = GaussianMixtureSpec::normalized_two_component(3, 0.35, 0.15);
  const Vector mean = spec.weights.transpose() * spec.means;
  EXPECT_LT(mean.cwiseAbs().maxCoeff(), 1e-15);
  for (int j = 0; j < 3; ++j) {
    double m2 = 0;
    for (int k = 0; k < 2; ++k) m2 += spec.weights[k] * (spec.means(k, j) * spec.means(k, j) + spec.variances[k]);
    EXPECT_NEAR(m2, 1.0, 1e-14);
  }
}

TEST(Data, NormalizeMoments) {
  Dataset raw = generate(Builtin::two_moons, 4000, 3);
  for (auto mode : {ScaleMode::per_coordinate, ScaleMode::global}) {
    const Dataset n = normalize(raw, mode);
    EXPECT_NEAR(n.samples.mean(), 0.0, 1e-12);
    EXPECT_NEAR(n.samples.squaredNorm() / static_cast<double>(n.samples.size()), 1.0, 1e-12);
    EXPECT_TRUE(n.normalized());
  }
  const Dataset pc = normalize(raw);
  for (int j = 0; j < 2; ++j) {
    EXPECT_NEAR(pc.samples.col(j).mean(), 0.0, 1e-12);
    EXPECT_NEAR(pc.samples.col(j).squaredNorm() / 4000.0, 1.0, 1e-12);
  }
}

TEST(Data, NormalizeConstantIsDegenerate) {
  Dataset d{"constant", Matrix::Constant(10, 3, 2.5), {}};
  EXPECT_THROW(normalize(d), DegenerateDataError);
  Dataset one_column{"mixed", Matrix::Random(10, 2), {}};
  one_column.samples.col(1).setConstant(4.0);
  EXPECT_THROW(normalize(one_column), DegenerateDataError);
}

TEST(Data, NormalizeAlreadyNormalizedIsIdentity) {
  const Dataset once = normalize(generate(Builtin::checkerboard, 2000, 4));
  Dataset plain{"again", once.samples, {}};
  const Dataset twice = normalize(plain);
  EXPECT_LT((twice.samples - once.samples).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LT((twice.normalization.scale.array() - 1.0).abs().maxCoeff(), 1e-9);
}

TEST(Data, NormalizeIsIdempotentAndInvertible) {
  const Dataset raw = generate(Builtin::two_moons, 1000, 6);
  const Dataset once = normalize(raw);
  const Dataset twice = normalize(once);
  EXPECT_LT((twice.samples - once.samples).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LT((denormalize(once) - raw.samples).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LT((denormalize(twice) - raw.samples).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Data, NormalizeIgnoresAffineInput) {
  const Dataset raw = generate(Builtin::checkerboard, 1000, 7);
  Dataset moved = raw;
  moved.samples = (raw.samples.array() * 3.7 + 11.0).matrix();
  EXPECT_LT((normalize(moved).samples - normalize(raw).samples).cwiseAbs().maxCoeff(), 1e-9);
  moved.samples = (raw.samples.array() * 0.25 - 2.0).matrix();
  EXPECT_LT((normalize(moved, ScaleMode::global).samples - normalize(raw, ScaleMode::global).samples).cwiseAbs().maxCoeff(),
            1e-9);
}

TEST(Data, AffineMixtureMatchesTransformedSamples) {
  const auto spec = GaussianMixtureSpec::normalized_two_component(2, 0.35, 0.15);
  Vector shift(2);
  shift << 0.5, -1.0;
  const auto moved = spec.affine(shift, 2.0);
  EXPECT_NEAR(moved.means(0, 0), (spec.means(0, 0) - 0.5) / 2.0, 1e-15);
  EXPECT_NEAR(moved.variances[0], spec.variances[0] / 4.0, 1e-15);
}
