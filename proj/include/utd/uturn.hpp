#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "utd/data.hpp"
#include "utd/errors.hpp"
#include "utd/forward.hpp"
#include "utd/kid.hpp"
#include "utd/reverse.hpp"
#include "utd/schedule.hpp"
#include "utd/score.hpp"
#include "utd/series.hpp"
#include "utd/types.hpp"

namespace utd {

struct UTurnSamples {
  Matrix synthetic;                  // rows aligned with `source`
  Matrix originals;                  // the seeding data rows, same order
  std::vector<Eigen::Index> source;  // dataset row behind each synthetic row
  int turn_step = 0;
};

// Forward M data rows to n_u with the chained kernel, then run the reverse
// process from those states back to 0. Uses the first M dataset rows.
inline UTurnSamples uturn_generate(const Dataset& dataset, const Schedule& schedule, const ScoreField& score, int turn_step,
                                   Eigen::Index M, std::uint64_t seed, Integrator integrator = Integrator::euler_maruyama) {
  if (turn_step < 1 || turn_step > schedule.steps()) throw RangeError("turn step must lie in [1, N]");
  if (!dataset.normalized()) throw ArgumentError("uturn_generate expects a normalised dataset");
  if (M < 1 || M > dataset.size()) throw ArgumentError("uturn_generate: M must lie in [1, dataset size]");
  if (dataset.dim() != score.dim()) throw ArgumentError("uturn_generate: score dimension mismatch");
  const Matrix initial = dataset.samples.topRows(M);
  const PathEnsemble forward = simulate_forward(initial, schedule, {turn_step}, seed);

  ReverseRunSpec spec;
  spec.start_step = turn_step;
  spec.init = ReverseInit::provided_states;
  spec.provided = forward.at_step(turn_step);
  spec.score = &score;
  spec.schedule = &schedule;
  spec.record_steps = {0};
  spec.seed = seed;
  spec.integrator = integrator;
  const PathEnsemble reverse = simulate_reverse(spec);

  UTurnSamples out;
  out.turn_step = turn_step;
  out.synthetic = reverse.at_step(0);
  std::size_t skip = 0;
  for (Eigen::Index i = 0; i < M; ++i) {
    if (skip < reverse.excluded.size() && reverse.excluded[skip] == i) {
      ++skip;
      continue;
    }
    out.source.push_back(i);
  }
  out.originals = initial(out.source, Eigen::all);
  return out;
}

// Reverse run from pure noise started at `start_step`; the control arm.
inline Matrix noise_generate(const ScoreField& score, const Schedule& schedule, int start_step, Eigen::Index M,
                             std::uint64_t seed, Integrator integrator = Integrator::euler_maruyama) {
  ReverseRunSpec spec;
  spec.start_step = start_step;
  spec.init = ReverseInit::noise;
  spec.samples = M;
  spec.score = &score;
  spec.schedule = &schedule;
  spec.record_steps = {0};
  spec.seed = seed;
  spec.integrator = integrator;
  return simulate_reverse(spec).at_step(0);
}

namespace detail {

inline std::vector<double> ranks(const Eigen::Ref<const Vector>& v) {
  const auto n = static_cast<std::size_t>(v.size());
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return v[a] < v[b]; });
  std::vector<double> r(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
    const double mid = 0.5 * static_cast<double>(i + j) + 1.0;  // ties share the average rank
    for (std::size_t k = i; k <= j; ++k) r[order[k]] = mid;
    i = j + 1;
  }
  return r;
}

inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const auto n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) ma += a[i], mb += b[i];
  ma /= n;
  mb /= n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return saa > 0 && sbb > 0 ? sab / std::sqrt(saa * sbb) : 0.0;
}

}  // namespace detail

// Pairing strength between each synthetic sample and the data row that
// seeded it: Spearman correlation per coordinate, averaged over coordinates.
// Near 1 for n_u = 1, near 0 once the turn state has forgotten its origin.
inline double pairing_rank_correlation(const Matrix& originals, const Matrix& synthetic) {
  if (originals.rows() != synthetic.rows() || originals.cols() != synthetic.cols())
    throw ArgumentError("pairing: shape mismatch");
  if (originals.rows() < 3) throw ArgumentError("pairing needs at least 3 pairs");
  double total = 0.0;
  for (Eigen::Index j = 0; j < originals.cols(); ++j)
    total += detail::pearson(detail::ranks(originals.col(j)), detail::ranks(synthetic.col(j)));
  return total / static_cast<double>(originals.cols());
}

// Two-segment continuous least squares over the interior points.
// std::nullopt with fewer than 4 points, for exactly linear data, or when
// the best hinge removes less than min_reduction of the straight-line SSE.
inline std::optional<int> detect_knee(const std::vector<int>& steps, const std::vector<double>& values,
                                      double min_reduction = 0.2) {
  if (steps.size() != values.size()) throw ArgumentError("detect_knee: length mismatch");
  const auto P = static_cast<Eigen::Index>(steps.size());
  if (P < 4) return std::nullopt;
  Vector t(P), y(P);
  for (Eigen::Index i = 0; i < P; ++i) {
    t[i] = steps[static_cast<std::size_t>(i)];
    y[i] = values[static_cast<std::size_t>(i)];
  }
  auto sse = [&](const Matrix& design) {
    const Vector coef = design.colPivHouseholderQr().solve(y);
    return (design * coef - y).squaredNorm();
  };
  Matrix line(P, 2);
  line.col(0).setOnes();
  line.col(1) = t;
  const double base = sse(line);
  const double scale = y.squaredNorm();
  if (!(base > 1e-24 * std::max(scale, 1e-300))) return std::nullopt;
  double best = base;
  std::optional<int> knee;
  for (Eigen::Index k = 1; k + 1 < P; ++k) {
    Matrix hinge(P, 3);
    hinge.leftCols(2) = line;
    hinge.col(2) = (t.array() - t[k]).max(0.0).matrix();
    const double err = sse(hinge);
    if (err < best) {
      best = err;
      knee = steps[static_cast<std::size_t>(k)];
    }
  }
  if (!knee || (base - best) / base < min_reduction) return std::nullopt;
  return knee;
}

// k N / 13 for k = 1..12, then N.
inline std::vector<int> default_turn_grid(int N) {
  std::vector<int> grid;
  for (int k = 1; k <= 12; ++k) {
    const int n = static_cast<int>(std::lround(static_cast<double>(k) * N / 13.0));
    if (n >= 1 && (grid.empty() || n > grid.back())) grid.push_back(n);
  }
  if (grid.empty() || grid.back() < N) grid.push_back(N);
  return grid;
}

struct UTurnOptions {
  FeatureSpec feature;
  KidOptions kid;
  Integrator integrator = Integrator::euler_maruyama;
};

struct UTurnScan {
  std::vector<int> turn_steps;
  std::vector<KidReport> kid_uturn;
  std::vector<KidReport> kid_noise;
  std::vector<double> pairing;
  std::optional<int> optimal_step;
  nlohmann::json config;

  void validate() const {
    if (kid_uturn.size() != turn_steps.size() || kid_noise.size() != turn_steps.size() ||
        pairing.size() != turn_steps.size())
      throw ValidationError("uturn scan: lists not aligned with turn steps");
    if (optimal_step && std::find(turn_steps.begin(), turn_steps.end(), *optimal_step) == turn_steps.end())
      throw ValidationError("uturn scan: optimal step is not a turn step");
  }

  std::vector<double> uturn_values() const {
    std::vector<double> v;
    for (const auto& r : kid_uturn) v.push_back(r.mmd2);
    return v;
  }

  void write_csv(std::ostream& out) const {
    out << "n_u,kid_uturn,stderr_uturn,kid_noise,stderr_noise\n";
    for (std::size_t i = 0; i < turn_steps.size(); ++i)
      out << turn_steps[i] << ',' << format_real(kid_uturn[i].mmd2) << ',' << format_real(kid_uturn[i].stderr) << ','
          << format_real(kid_noise[i].mmd2) << ',' << format_real(kid_noise[i].stderr) << '\n';
  }

  nlohmann::json summary() const {
    nlohmann::json points = nlohmann::json::array();
    for (std::size_t i = 0; i < turn_steps.size(); ++i)
      points.push_back({{"n_u", turn_steps[i]},
                        {"uturn", kid_uturn[i].to_json()},
                        {"noise", kid_noise[i].to_json()},
                        {"pairing_rank_correlation", pairing[i]}});
    nlohmann::json j{{"turn_steps", turn_steps}, {"points", points}, {"config", config}};
    j["optimal_step"] = optimal_step ? nlohmann::json(*optimal_step) : nlohmann::json("none");
    return j;
  }
};

// Throws ValidationError if any holdout row also appears in `used`.
inline void check_disjoint(const Matrix& used, const Matrix& holdout) {
  if (used.cols() != holdout.cols()) throw ArgumentError("holdout dimension mismatch");
  std::set<std::vector<double>> seen;
  for (Eigen::Index i = 0; i < used.rows(); ++i) {
    std::vector<double> row(static_cast<std::size_t>(used.cols()));
    for (Eigen::Index j = 0; j < used.cols(); ++j) row[static_cast<std::size_t>(j)] = used(i, j);
    seen.insert(std::move(row));
  }
  for (Eigen::Index i = 0; i < holdout.rows(); ++i) {
    std::vector<double> row(static_cast<std::size_t>(holdout.cols()));
    for (Eigen::Index j = 0; j < holdout.cols(); ++j) row[static_cast<std::size_t>(j)] = holdout(i, j);
    if (seen.count(row)) throw ValidationError("holdout row " + std::to_string(i) + " also seeds the forward runs");
  }
}

// For every turn step: U-turn synthetics and a noise-started reverse run
// from the same step, each scored by KID against the holdout. All steps
// share the same seeds.
inline UTurnScan uturn_scan(const Dataset& dataset, const Schedule& schedule, const ScoreField& score,
                            std::vector<int> turn_steps, Eigen::Index M, std::uint64_t seed, const Matrix& holdout,
                            const UTurnOptions& options = {}) {
  if (turn_steps.empty()) turn_steps = default_turn_grid(schedule.steps());
  if (!std::is_sorted(turn_steps.begin(), turn_steps.end()) ||
      std::adjacent_find(turn_steps.begin(), turn_steps.end()) != turn_steps.end())
    throw ArgumentError("turn steps must be strictly increasing");
  if (options.feature.mode == FeatureMode::external_file)
    throw ArgumentError("uturn scan needs a feature map computable from samples");
  if (M < 1 || M > dataset.size()) throw ArgumentError("uturn scan: M must lie in [1, dataset size]");
  check_disjoint(dataset.samples.topRows(M), holdout);

  UTurnScan scan;
  scan.turn_steps = turn_steps;
  const Matrix real = feature_map(holdout, options.feature);
  for (int n_u : turn_steps) {
    const UTurnSamples u = uturn_generate(dataset, schedule, score, n_u, M, seed, options.integrator);
    const Matrix noise = noise_generate(score, schedule, n_u, M, seed, options.integrator);
    scan.kid_uturn.push_back(kid(real, feature_map(u.synthetic, options.feature), options.kid, options.feature.id()));
    scan.kid_noise.push_back(kid(real, feature_map(noise, options.feature), options.kid, options.feature.id()));
    scan.pairing.push_back(u.synthetic.rows() >= 3 ? pairing_rank_correlation(u.originals, u.synthetic) : 0.0);
  }
  scan.optimal_step = detect_knee(scan.turn_steps, scan.uturn_values());
  scan.config = {{"schedule", schedule_to_json(schedule.spec())},
                 {"score", score.id()},
                 {"M", M},
                 {"holdout", holdout.rows()},
                 {"seed", seed},
                 {"feature", options.feature.id()},
                 {"kid_resamples", options.kid.resamples},
                 {"kid_seed", options.kid.seed}};
  scan.validate();
  return scan;
}

}  // namespace utd
