#pragma once

#include <cstdint>
#include <random>

#include "utd/types.hpp"

namespace utd {

using Engine = std::mt19937_64;

// Purpose tags mixed into every seed so independent consumers of one
// user seed never share a random stream.
enum class Stream : std::uint32_t {
  data = 1,
  forward = 2,
  reverse = 3,
  training = 4,
  bootstrap = 5,
  projection = 6,
  init = 7,
  probes = 8,
};

// Deterministic engine for (seed, purpose, index). Per-sample streams use
// the sample index, which makes simulations independent of how samples are
// distributed over workers.
inline Engine make_engine(std::uint64_t seed, Stream stream, std::uint64_t index = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32)};
  return Engine(seq);
}

inline double standard_normal(Engine& engine) {
  std::normal_distribution<double> dist(0.0, 1.0);
  return dist(engine);
}

inline Vector standard_normal_vector(Engine& engine, Eigen::Index dim) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Vector z(dim);
  for (Eigen::Index i = 0; i < dim; ++i) z[i] = dist(engine);
  return z;
}

inline Matrix standard_normal_matrix(Engine& engine, Eigen::Index rows, Eigen::Index cols) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Matrix z(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) z(i, j) = dist(engine);
  return z;
}

}  // namespace utd
