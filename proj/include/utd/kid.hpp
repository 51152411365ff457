#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "utd/errors.hpp"
#include "utd/io.hpp"
#include "utd/rng.hpp"
#include "utd/types.hpp"

namespace utd {

// Polynomial kernel k(u, v) = (scale * u.v + offset)^degree.
struct PolynomialKernel {
  int degree = 3;
  double offset = 1.0;
  double scale = 1.0;  // 1 / d by default

  static PolynomialKernel standard(Eigen::Index dim) { return {3, 1.0, 1.0 / static_cast<double>(dim)}; }

  double operator()(const Eigen::Ref<const Eigen::RowVectorXd>& u, const Eigen::Ref<const Eigen::RowVectorXd>& v) const {
    return std::pow(scale * u.dot(v) + offset, degree);
  }
};

struct KidOptions {
  int resamples = 10;
  std::uint64_t seed = 0;
  Eigen::Index block = 1;  // rows per bootstrap block
  Eigen::Index tile = 512;
};

struct KidReport {
  double mmd2 = 0.0;
  double stderr = 0.0;
  PolynomialKernel kernel;
  Eigen::Index m_real = 0;
  Eigen::Index m_gen = 0;
  std::string feature = "identity";
  int resamples = 0;
  std::uint64_t bootstrap_seed = 0;

  nlohmann::json to_json() const {
    return {{"mmd2", mmd2},
            {"stderr", stderr},
            {"kernel", {{"type", "polynomial"}, {"degree", kernel.degree}, {"offset", kernel.offset}, {"scale", kernel.scale}}},
            {"m_real", m_real},
            {"m_gen", m_gen},
            {"feature", feature},
            {"bootstrap_resamples", resamples},
            {"bootstrap_seed", bootstrap_seed}};
  }
};

namespace detail {

// Bootstrap multiplicities: column 0 is all ones (the plain estimate),
// columns 1..R resample contiguous row blocks with replacement.
inline Matrix bootstrap_weights(Eigen::Index rows, const KidOptions& opt, Engine& rng) {
  Matrix c = Matrix::Zero(rows, opt.resamples + 1);
  c.col(0).setOnes();
  const Eigen::Index block = std::max<Eigen::Index>(1, opt.block);
  const Eigen::Index blocks = (rows + block - 1) / block;
  std::uniform_int_distribution<Eigen::Index> pick(0, blocks - 1);
  for (int r = 1; r <= opt.resamples; ++r)
    for (Eigen::Index b = 0; b < blocks; ++b) {
      const Eigen::Index start = pick(rng) * block;
      for (Eigen::Index i = start; i < std::min(rows, start + block); ++i) c(i, r) += 1.0;
    }
  return c;
}

inline Matrix kernel_tile(const Matrix& a, const Matrix& b, const PolynomialKernel& k) {
  Matrix g = a * b.transpose();
  return g.unaryExpr([&](double v) { return std::pow(k.scale * v + k.offset, k.degree); });
}

// sum_{i,j} ca_i k(a_i, b_j) cb_j per weight column, skipping i == j when
// `same` (a and b are the same set).
inline Vector weighted_kernel_sum(const Matrix& a, const Matrix& b, const Matrix& ca, const Matrix& cb, bool same,
                                  const PolynomialKernel& k, Eigen::Index tile) {
  Vector total = Vector::Zero(ca.cols());
  for (Eigen::Index i0 = 0; i0 < a.rows(); i0 += tile) {
    const Eigen::Index ni = std::min(tile, a.rows() - i0);
    const Eigen::Index j_start = same ? i0 : 0;
    for (Eigen::Index j0 = j_start; j0 < b.rows(); j0 += tile) {
      const Eigen::Index nj = std::min(tile, b.rows() - j0);
      Matrix g = kernel_tile(a.middleRows(i0, ni), b.middleRows(j0, nj), k);
      double factor = 1.0;
      if (same) {
        if (i0 == j0) {
          g.diagonal().setZero();
        } else {
          factor = 2.0;  // the mirrored tile is skipped
        }
      }
      const Matrix gc = g * cb.middleRows(j0, nj);
      total += factor * (ca.middleRows(i0, ni).cwiseProduct(gc)).colwise().sum().transpose();
    }
  }
  return total;
}

inline bool lexicographically_less(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) return a.rows() < b.rows();
  return std::lexicographical_compare(a.data(), a.data() + a.size(), b.data(), b.data() + b.size());
}

}  // namespace detail

// Unbiased squared MMD with the polynomial kernel (degree 3, offset 1,
// scale 1/d): off-diagonal means within each set plus the full cross mean.
// The arguments are processed in a canonical order, so kid(a, b) and
// kid(b, a) agree bit for bit. Negative values are reported as is.
inline KidReport kid(const Matrix& real, const Matrix& gen, const KidOptions& options = {}, std::string feature = "identity") {
  if (real.cols() != gen.cols()) throw ArgumentError("kid: feature dimensions differ");
  if (real.rows() < 2 || gen.rows() < 2) throw ArgumentError("kid: each set needs at least 2 rows");
  if (options.resamples < 0) throw ArgumentError("kid: resamples must be >= 0");
  const bool swap = detail::lexicographically_less(gen, real);
  const Matrix& a = swap ? gen : real;
  const Matrix& b = swap ? real : gen;
  const PolynomialKernel kernel = PolynomialKernel::standard(real.cols());

  Engine rng = make_engine(options.seed, Stream::bootstrap);
  const Matrix ca = detail::bootstrap_weights(a.rows(), options, rng);
  const Matrix cb = detail::bootstrap_weights(b.rows(), options, rng);
  const Vector aa = detail::weighted_kernel_sum(a, a, ca, ca, true, kernel, options.tile);
  const Vector bb = detail::weighted_kernel_sum(b, b, cb, cb, true, kernel, options.tile);
  const Vector ab = detail::weighted_kernel_sum(a, b, ca, cb, false, kernel, options.tile);

  const int R = options.resamples;
  Vector estimates(R + 1);
  for (int r = 0; r <= R; ++r) {
    const double sa = ca.col(r).sum(), sb = cb.col(r).sum();
    const double pa = sa * sa - ca.col(r).squaredNorm();
    const double pb = sb * sb - cb.col(r).squaredNorm();
    estimates[r] = aa[r] / pa + bb[r] / pb - 2.0 * ab[r] / (sa * sb);
  }
  KidReport report;
  report.mmd2 = estimates[0];
  if (R >= 2) {
    const Vector boot = estimates.tail(R);
    report.stderr = std::sqrt((boot.array() - boot.mean()).square().sum() / (R - 1));
  }
  report.kernel = kernel;
  report.m_real = real.rows();
  report.m_gen = gen.rows();
  report.feature = std::move(feature);
  report.resamples = R;
  report.bootstrap_seed = options.seed;
  return report;
}

enum class FeatureMode { identity, random_projection, external_file };

struct FeatureSpec {
  FeatureMode mode = FeatureMode::identity;
  Eigen::Index projection_dim = 64;
  std::uint64_t seed = 0;
  std::string path;

  std::string id() const {
    switch (mode) {
      case FeatureMode::identity: return "identity";
      case FeatureMode::random_projection:
        return "random_projection(" + std::to_string(projection_dim) + "," + std::to_string(seed) + ")";
      case FeatureMode::external_file: return "external_file(" + path + ")";
    }
    return "unknown";
  }
};

// Gaussian projection with entries N(0, 1) / sqrt(dim); squared distances
// are preserved in expectation.
inline Matrix projection_matrix(Eigen::Index input_dim, Eigen::Index dim, std::uint64_t seed) {
  Engine rng = make_engine(seed, Stream::projection);
  return standard_normal_matrix(rng, input_dim, dim) / std::sqrt(static_cast<double>(dim));
}

inline Matrix feature_map(const Matrix& samples, const FeatureSpec& spec) {
  switch (spec.mode) {
    case FeatureMode::identity:
      return samples;
    case FeatureMode::random_projection:
      if (spec.projection_dim < 1) throw ArgumentError("projection dimension must be >= 1");
      return samples * projection_matrix(samples.cols(), spec.projection_dim, spec.seed);
    case FeatureMode::external_file: {
      Matrix features = io::load_binary(spec.path);
      if (samples.rows() > 0 && features.rows() != samples.rows())
        throw LoadError(spec.path + ": feature row count does not match samples");
      return features;
    }
  }
  return samples;
}

}  // namespace utd
