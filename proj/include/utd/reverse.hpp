#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <optional>
#include <vector>

#include "utd/ensemble.hpp"
#include "utd/errors.hpp"
#include "utd/parallel.hpp"
#include "utd/rng.hpp"
#include "utd/schedule.hpp"
#include "utd/score.hpp"
#include "utd/types.hpp"

namespace utd {

enum class ReverseInit { noise, provided_states };
enum class Integrator { euler_maruyama, ancestral };

struct ReverseRunSpec {
  int start_step = 0;
  ReverseInit init = ReverseInit::noise;
  Eigen::Index samples = 0;        // used with ReverseInit::noise
  std::optional<Matrix> provided;  // used with ReverseInit::provided_states
  const ScoreField* score = nullptr;
  const Schedule* schedule = nullptr;
  std::vector<int> record_steps;
  std::uint64_t seed = 0;
  Integrator integrator = Integrator::euler_maruyama;
  int substeps = 1;
  bool deterministic = false;  // drop the noise term
  double max_abort_fraction = 0.01;
};

// Backward Euler-Maruyama update for the VP reverse SDE over one step of
// rate b: x + b (x / 2 + s) + sqrt(b) z.
inline Vector reverse_update(const Vector& x, double rate, const Vector& score, const Vector& z) {
  return x + rate * (0.5 * x + score) + std::sqrt(rate) * z;
}

inline Vector reverse_step(const Vector& x, int n, const ScoreField& score, const Schedule& schedule, Engine& rng) {
  if (n < 1 || n > schedule.steps()) throw RangeError("reverse step needs 1 <= n <= N");
  const Vector s = score.evaluate(x, n);
  if (!s.allFinite()) throw PropagationError("non-finite score at step " + std::to_string(n), n);
  return reverse_update(x, schedule.beta(n), s, standard_normal_vector(rng, x.size()));
}

// Integrates from start_step down to 0, recording the requested steps.
// Sample i draws its initial noise and every increment from the stream
// (seed, reverse, i). Samples whose score turns non-finite are dropped and
// listed in `excluded`; more than max_abort_fraction of them fails the run.
inline PathEnsemble simulate_reverse(const ReverseRunSpec& spec) {
  if (!spec.score || !spec.schedule) throw ArgumentError("reverse run needs a score and a schedule");
  const Schedule& schedule = *spec.schedule;
  if (spec.start_step < 0 || spec.start_step > schedule.steps()) throw RangeError("start step outside [0, N]");
  check_record_steps(spec.record_steps, spec.start_step);
  if (spec.substeps < 1) throw ArgumentError("substeps must be >= 1");
  const Eigen::Index d = spec.score->dim();
  Eigen::Index M = spec.samples;
  if (spec.init == ReverseInit::provided_states) {
    if (!spec.provided || spec.provided->rows() < 1) throw ArgumentError("provided states are missing");
    if (spec.provided->cols() != d) throw ArgumentError("provided states do not match score dimension");
    M = spec.provided->rows();
  } else if (M < 1) {
    throw ArgumentError("noise-initialised run needs at least one sample");
  }

  // steps are recorded in descending time; store ascending
  PathEnsemble out;
  out.direction = Direction::reverse;
  out.init_mode = spec.init == ReverseInit::noise ? InitMode::noise : InitMode::uturn_state;
  out.record_steps = spec.record_steps;
  out.seed = spec.seed;
  out.schedule = schedule.spec();
  out.values.assign(spec.record_steps.size(), Matrix(M, d));
  std::vector<char> aborted(static_cast<std::size_t>(M), 0);
  auto slot = [&](int n) -> std::optional<std::size_t> {
    auto it = std::lower_bound(spec.record_steps.begin(), spec.record_steps.end(), n);
    if (it == spec.record_steps.end() || *it != n) return std::nullopt;
    return static_cast<std::size_t>(it - spec.record_steps.begin());
  };

  for_each_block(static_cast<std::size_t>(M), kBlockSize, [&](std::size_t begin, std::size_t end) {
    const auto rows = static_cast<Eigen::Index>(end - begin);
    std::vector<Engine> engines;
    engines.reserve(end - begin);
    for (std::size_t i = begin; i < end; ++i) engines.push_back(make_engine(spec.seed, Stream::reverse, i));
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix x(rows, d);
    if (spec.init == ReverseInit::noise) {
      for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index j = 0; j < d; ++j) x(r, j) = normal(engines[static_cast<std::size_t>(r)]);
    } else {
      x = spec.provided->middleRows(static_cast<Eigen::Index>(begin), rows);
    }
    std::vector<char> dead(static_cast<std::size_t>(rows), 0);
    auto record = [&](int n) {
      if (auto s = slot(n)) out.values[*s].middleRows(static_cast<Eigen::Index>(begin), rows) = x;
    };
    record(spec.start_step);
    const double inv_k = 1.0 / spec.substeps;
    for (int n = spec.start_step; n >= 1; --n) {
      const double rate = schedule.beta(n);
      for (int k = 0; k < spec.substeps; ++k) {
        const Matrix s = spec.score->evaluate(x, n);
        for (Eigen::Index r = 0; r < rows; ++r) {
          auto& engine = engines[static_cast<std::size_t>(r)];
          if (dead[static_cast<std::size_t>(r)]) {
            for (Eigen::Index j = 0; j < d; ++j) normal(engine);
            continue;
          }
          if (!s.row(r).allFinite()) {
            dead[static_cast<std::size_t>(r)] = 1;
            x.row(r).setZero();
            continue;
          }
          if (spec.integrator == Integrator::euler_maruyama) {
            const double b = rate * inv_k;
            const double noise = spec.deterministic ? 0.0 : std::sqrt(b);
            for (Eigen::Index j = 0; j < d; ++j) {
              const double z = normal(engine);
              x(r, j) += b * (0.5 * x(r, j) + s(r, j)) + noise * z;
            }
          } else {
            // DDPM ancestral update; substeps are ignored
            const double noise = spec.deterministic ? 0.0 : std::sqrt(rate);
            const double scale = 1.0 / std::sqrt(1.0 - rate);
            for (Eigen::Index j = 0; j < d; ++j) {
              const double z = normal(engine);
              x(r, j) = scale * (x(r, j) + rate * s(r, j)) + noise * z;
            }
          }
          if (!x.row(r).allFinite()) {
            dead[static_cast<std::size_t>(r)] = 1;
            x.row(r).setZero();
          }
        }
        if (spec.integrator == Integrator::ancestral) break;
      }
      record(n - 1);
    }
    for (Eigen::Index r = 0; r < rows; ++r)
      if (dead[static_cast<std::size_t>(r)]) aborted[begin + static_cast<std::size_t>(r)] = 1;
  });

  for (Eigen::Index i = 0; i < M; ++i)
    if (aborted[static_cast<std::size_t>(i)]) out.excluded.push_back(i);
  if (static_cast<double>(out.excluded.size()) > spec.max_abort_fraction * static_cast<double>(M))
    throw PropagationError("reverse run aborted " + std::to_string(out.excluded.size()) + " of " + std::to_string(M) +
                               " samples",
                           0);
  if (!out.excluded.empty()) {
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < M; ++i)
      if (!aborted[static_cast<std::size_t>(i)]) keep.push_back(i);
    for (auto& v : out.values) v = Matrix(v(keep, Eigen::all));
  }
  return out;
}

}  // namespace utd
