#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "utd/errors.hpp"
#include "utd/rng.hpp"
#include "utd/types.hpp"

namespace utd {

// Isotropic Gaussian mixture sum_k w_k N(mu_k, sigma_k^2 I).
struct GaussianMixtureSpec {
  Vector weights;    // K
  Matrix means;      // K x d
  Vector variances;  // K

  Eigen::Index components() const { return weights.size(); }
  Eigen::Index dim() const { return means.cols(); }

  void validate() const {
    const auto K = weights.size();
    if (K < 1) throw ValidationError("mixture needs at least one component");
    if (means.rows() != K || variances.size() != K)
      throw ValidationError("mixture weights, means and variances disagree on component count");
    if (means.cols() < 1) throw ValidationError("mixture dimension must be >= 1");
    if (!means.allFinite()) throw ValidationError("mixture means must be finite");
    for (Eigen::Index k = 0; k < K; ++k) {
      if (!(weights[k] > 0.0)) throw ValidationError("mixture weights must be strictly positive");
      if (!(variances[k] > 0.0) || !std::isfinite(variances[k]))
        throw ValidationError("mixture variances must be positive");
    }
    if (std::abs(weights.sum() - 1.0) > 1e-12) throw ValidationError("mixture weights must sum to 1");
  }

  // Image of the mixture under x -> (x - shift) / scale.
  GaussianMixtureSpec affine(const Vector& shift, double scale) const {
    GaussianMixtureSpec out = *this;
    out.means = (means.rowwise() - shift.transpose()) / scale;
    out.variances = variances / (scale * scale);
    return out;
  }

  // Two components placed on +-c along the all-ones direction with weights
  // (w, 1 - w), chosen so the population mean is 0 and every coordinate has
  // second moment 1.
  static GaussianMixtureSpec normalized_two_component(int dim, double first_weight, double variance) {
    if (!(first_weight > 0.0 && first_weight < 1.0)) throw ValidationError("first weight must lie in (0, 1)");
    if (!(variance > 0.0 && variance < 1.0)) throw ValidationError("component variance must lie in (0, 1)");
    const double w1 = first_weight, w2 = 1.0 - first_weight;
    const double spread = std::sqrt(1.0 - variance);
    GaussianMixtureSpec spec;
    spec.weights = Vector(2);
    spec.weights << w1, w2;
    spec.means = Matrix(2, dim);
    spec.means.row(0).setConstant(spread * std::sqrt(w2 / w1));
    spec.means.row(1).setConstant(-spread * std::sqrt(w1 / w2));
    spec.variances = Vector::Constant(2, variance);
    return spec;
  }

  static GaussianMixtureSpec standard_normal(int dim) {
    GaussianMixtureSpec spec;
    spec.weights = Vector::Ones(1);
    spec.means = Matrix::Zero(1, dim);
    spec.variances = Vector::Ones(1);
    return spec;
  }
};

// Record of x_normalized = (x_raw - shift) / scale, per coordinate.
struct Normalization {
  Vector shift;
  Vector scale;

  bool empty() const { return shift.size() == 0; }
};

struct Dataset {
  std::string name;
  Matrix samples;  // M x d
  Normalization normalization;

  Eigen::Index size() const { return samples.rows(); }
  Eigen::Index dim() const { return samples.cols(); }
  bool normalized() const { return !normalization.empty(); }
};

enum class Builtin { two_moons, checkerboard, tiny_glyphs_8x8 };

inline std::string to_string(Builtin b) {
  switch (b) {
    case Builtin::two_moons: return "two_moons";
    case Builtin::checkerboard: return "checkerboard";
    case Builtin::tiny_glyphs_8x8: return "tiny_glyphs_8x8";
  }
  return "unknown";
}

inline Builtin builtin_from_string(const std::string& s) {
  if (s == "two_moons") return Builtin::two_moons;
  if (s == "checkerboard") return Builtin::checkerboard;
  if (s == "tiny_glyphs_8x8") return Builtin::tiny_glyphs_8x8;
  throw ValidationError("unknown builtin dataset '" + s + "'");
}

namespace detail {

inline void require_sample_count(Eigen::Index M) {
  if (M < 2) throw ValidationError("dataset needs at least 2 samples");
}

// Nearest-mean component index; used for occupancy checks.
inline Eigen::Index nearest_component(const GaussianMixtureSpec& spec, const Eigen::Ref<const Vector>& x) {
  Eigen::Index best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < spec.components(); ++k) {
    const double d = (spec.means.row(k).transpose() - x).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = k;
    }
  }
  return best;
}

// 8x8 binary glyphs; '#' is on.
inline const std::array<std::array<const char*, 8>, 8>& glyph_bitmaps() {
  static const std::array<std::array<const char*, 8>, 8> glyphs{{
      {"..####..", ".#....#.", "#......#", "#......#", "#......#", "#......#", ".#....#.", "..####.."},
      {"...##...", "..###...", ".#.##...", "...##...", "...##...", "...##...", "...##...", ".######."},
      {"########", "#......#", "#......#", "#......#", "#......#", "#......#", "#......#", "########"},
      {"#......#", ".#....#.", "..#..#..", "...##...", "...##...", "..#..#..", ".#....#.", "#......#"},
      {"...##...", "...##...", "...##...", "########", "########", "...##...", "...##...", "...##..."},
      {"........", "........", "########", "........", "........", "########", "........", "........"},
      {"#.......", "##......", "###.....", "####....", "#####...", "######..", "#######.", "########"},
      {"#.#.#.#.", ".#.#.#.#", "#.#.#.#.", ".#.#.#.#", "#.#.#.#.", ".#.#.#.#", "#.#.#.#.", ".#.#.#.#"},
  }};
  return glyphs;
}

}  // namespace detail

// Fraction of rows assigned (nearest mean) to each component.
inline Vector component_occupancy(const GaussianMixtureSpec& spec, const Matrix& samples) {
  Vector counts = Vector::Zero(spec.components());
  for (Eigen::Index i = 0; i < samples.rows(); ++i)
    counts[detail::nearest_component(spec, samples.row(i).transpose())] += 1.0;
  return counts / static_cast<double>(samples.rows());
}

// Raw i.i.d. draws from a mixture.
inline Matrix sample_mixture(const GaussianMixtureSpec& spec, Eigen::Index M, Engine& engine) {
  std::discrete_distribution<Eigen::Index> pick(spec.weights.data(), spec.weights.data() + spec.weights.size());
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix out(M, spec.dim());
  for (Eigen::Index i = 0; i < M; ++i) {
    const Eigen::Index k = pick(engine);
    const double sd = std::sqrt(spec.variances[k]);
    for (Eigen::Index j = 0; j < spec.dim(); ++j) out(i, j) = spec.means(k, j) + sd * normal(engine);
  }
  return out;
}

inline Dataset generate(const GaussianMixtureSpec& spec, Eigen::Index M, std::uint64_t seed) {
  spec.validate();
  detail::require_sample_count(M);
  Engine engine = make_engine(seed, Stream::data);
  return Dataset{.name = "gaussian_mixture", .samples = sample_mixture(spec, M, engine), .normalization = {}};
}

inline Dataset generate(Builtin builtin, Eigen::Index M, std::uint64_t seed) {
  detail::require_sample_count(M);
  Engine engine = make_engine(seed, Stream::data);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  Matrix out;
  switch (builtin) {
    case Builtin::two_moons: {
      out.resize(M, 2);
      for (Eigen::Index i = 0; i < M; ++i) {
        const double t = std::numbers::pi * uniform(engine);
        const bool upper = uniform(engine) < 0.5;
        const double x = upper ? std::cos(t) : 1.0 - std::cos(t);
        const double y = upper ? std::sin(t) : 0.5 - std::sin(t);
        out(i, 0) = x + 0.1 * normal(engine);
        out(i, 1) = y + 0.1 * normal(engine);
      }
      break;
    }
    case Builtin::checkerboard: {
      // 4x4 board on [-2, 2]^2, dark squares only.
      out.resize(M, 2);
      for (Eigen::Index i = 0; i < M;) {
        const double x = 4.0 * uniform(engine) - 2.0;
        const double y = 4.0 * uniform(engine) - 2.0;
        const int cx = static_cast<int>(std::floor(x + 2.0));
        const int cy = static_cast<int>(std::floor(y + 2.0));
        if ((cx + cy) % 2 == 0) {
          out(i, 0) = x;
          out(i, 1) = y;
          ++i;
        }
      }
      break;
    }
    case Builtin::tiny_glyphs_8x8: {
      const auto& glyphs = detail::glyph_bitmaps();
      std::uniform_int_distribution<std::size_t> pick(0, glyphs.size() - 1);
      out.resize(M, 64);
      for (Eigen::Index i = 0; i < M; ++i) {
        const auto& g = glyphs[pick(engine)];
        for (int r = 0; r < 8; ++r)
          for (int c = 0; c < 8; ++c) out(i, 8 * r + c) = (g[r][c] == '#' ? 1.0 : 0.0) + 0.1 * normal(engine);
      }
      break;
    }
  }
  return Dataset{.name = to_string(builtin), .samples = std::move(out), .normalization = {}};
}

enum class ScaleMode { per_coordinate, global };

// Shifts every coordinate to mean 0 and rescales so the pooled second
// moment is 1 (per coordinate, or with one shared scale). The returned
// record composes with any earlier normalization, so denormalize() always
// recovers the raw data.
inline Dataset normalize(const Dataset& dataset, ScaleMode mode = ScaleMode::per_coordinate) {
  detail::require_sample_count(dataset.size());
  const Matrix& X = dataset.samples;
  const Vector mean = X.colwise().mean().transpose();
  const Matrix centered = X.rowwise() - mean.transpose();
  Vector scale(X.cols());
  if (mode == ScaleMode::per_coordinate) {
    scale = (centered.colwise().squaredNorm() / static_cast<double>(X.rows())).cwiseSqrt().transpose();
  } else {
    scale.setConstant(std::sqrt(centered.squaredNorm() / static_cast<double>(X.size())));
  }
  for (Eigen::Index j = 0; j < scale.size(); ++j) {
    const double floor = 1e-12 * (1.0 + std::abs(mean[j]));
    if (!(scale[j] > floor)) throw DegenerateDataError("coordinate " + std::to_string(j) + " has zero variance");
  }
  Dataset out;
  out.name = dataset.name;
  out.samples = centered.array().rowwise() / scale.transpose().array();
  if (dataset.normalized()) {
    // raw = old_scale * (old_scale^-1 (raw - old_shift)); compose the two maps
    out.normalization.shift = dataset.normalization.shift + dataset.normalization.scale.cwiseProduct(mean);
    out.normalization.scale = dataset.normalization.scale.cwiseProduct(scale);
  } else {
    out.normalization.shift = mean;
    out.normalization.scale = scale;
  }
  return out;
}

inline Matrix denormalize(const Matrix& samples, const Normalization& record) {
  if (record.empty()) return samples;
  if (record.shift.size() != samples.cols()) throw ArgumentError("normalization record dimension mismatch");
  Matrix out = samples.array().rowwise() * record.scale.transpose().array();
  out.rowwise() += record.shift.transpose();
  return out;
}

inline Matrix denormalize(const Dataset& dataset) { return denormalize(dataset.samples, dataset.normalization); }

}  // namespace utd
