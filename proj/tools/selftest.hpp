#pragma once

#include <cmath>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "utd/diagnostics.hpp"
#include "utd/forward.hpp"
#include "utd/io.hpp"
#include "utd/kid.hpp"
#include "utd/mlp.hpp"
#include "utd/schedule.hpp"
#include "utd/score.hpp"
#include "utd/uturn.hpp"

namespace utd::cli {

struct Suite {
  std::string name;
  std::vector<std::pair<std::string, std::function<bool()>>> checks;
};

inline std::vector<Suite> selftest_suites() {
  std::vector<Suite> suites;

  suites.push_back({"schedule", {}});
  for (auto kind : {ScheduleKind::linear, ScheduleKind::sigmoid, ScheduleKind::cosine}) {
    suites.back().checks.emplace_back("product " + to_string(kind), [kind] {
      const Schedule s({kind});
      double product = 1.0, worst = 0.0;
      for (int n = 1; n <= s.steps(); ++n) {
        product *= 1.0 - s.beta(n);
        worst = std::max(worst, std::abs(s.phi(n, 0) - product) / product);
      }
      return worst < 1e-12;
    });
    suites.back().checks.emplace_back("coefficients " + to_string(kind), [kind] {
      const Schedule s({kind});
      for (int n = 0; n <= s.steps(); ++n) {
        const double m = s.mean_coefficient(n), d = s.std_coefficient(n);
        if (std::abs(m * m + d * d - 1.0) > 1e-12) return false;
      }
      return true;
    });
  }

  suites.push_back({"forward", {}});
  suites.back().checks.emplace_back("autocorr from 0", [] {
    const Schedule s({ScheduleKind::linear});
    const auto spec = GaussianMixtureSpec::normalized_two_component(2, 0.35, 0.15);
    const Dataset data = generate(spec, 4000, 11);
    const auto grid = step_grid(1000, 10);
    const PathEnsemble e = simulate_forward(data.samples, s, grid, 12);
    const auto emp = empirical_autocorr(e, 0, grid);
    for (std::size_t i = 0; i < grid.size(); ++i)
      if (std::abs(emp.values[i] - std::sqrt(s.phi(grid[i], 0))) > 5.0 / std::sqrt(4000.0)) return false;
    return true;
  });

  suites.push_back({"score", {}});
  suites.back().checks.emplace_back("finite differences", [] {
    const Schedule s({ScheduleKind::cosine});
    const GaussianMixtureScore score(GaussianMixtureSpec::normalized_two_component(3, 0.3, 0.2), s);
    Engine rng = make_engine(5, Stream::probes);
    for (int n : {1, 100, 500, 999}) {
      for (int p = 0; p < 5; ++p) {
        const Vector x = standard_normal_vector(rng, 3);
        const Vector g = score.evaluate(x, n);
        for (int j = 0; j < 3; ++j) {
          Vector up = x, down = x;
          up[j] += 1e-5;
          down[j] -= 1e-5;
          const double fd = (score.log_density(up, n) - score.log_density(down, n)) / 2e-5;
          if (std::abs(fd - g[j]) > 1e-5 * std::max(1.0, std::abs(g[j]))) return false;
        }
      }
    }
    return true;
  });
  suites.back().checks.emplace_back("dsm weighting", [] {
    const Schedule s({ScheduleKind::linear});
    Engine rng = make_engine(3, Stream::probes);
    for (int n : {1, 250, 1000}) {
      double total = 0;
      const int M = 20000;
      for (int i = 0; i < M; ++i) {
        const Vector x0 = standard_normal_vector(rng, 2);
        const Vector xt = jump_sample(x0, n, s, rng);
        total += s.lambda(n) * dsm_target(xt, x0, n, s).squaredNorm();
      }
      if (std::abs(total / M - 2.0) > 0.1) return false;
    }
    return true;
  });

  suites.push_back({"mlp", {}});
  suites.back().checks.emplace_back("backprop", [] {
    const Schedule s({ScheduleKind::linear});
    MlpScoreModel model(2, 1000, {{16, 16}, 8, Activation::silu}, 4);
    Engine rng = make_engine(9, Stream::probes);
    const Matrix x0 = standard_normal_matrix(rng, 8, 2);
    std::vector<int> steps{1, 10, 100, 300, 500, 700, 900, 1000};
    Matrix xt(8, 2);
    for (int i = 0; i < 8; ++i) xt.row(i) = jump_sample(x0.row(i).transpose(), steps[i], s, rng).transpose();
    return finite_diff_check(model, make_dsm_batch(xt, x0, steps, s), 1e-5) < 1e-4;
  });

  suites.push_back({"kid", {}});
  suites.back().checks.emplace_back("brute force", [] {
    Engine rng = make_engine(21, Stream::probes);
    const Matrix a = standard_normal_matrix(rng, 30, 3), b = standard_normal_matrix(rng, 25, 3).array() + 0.3;
    const PolynomialKernel k = PolynomialKernel::standard(3);
    double xx = 0, yy = 0, xy = 0;
    for (int i = 0; i < 30; ++i)
      for (int j = 0; j < 30; ++j)
        if (i != j) xx += k(a.row(i), a.row(j));
    for (int i = 0; i < 25; ++i)
      for (int j = 0; j < 25; ++j)
        if (i != j) yy += k(b.row(i), b.row(j));
    for (int i = 0; i < 30; ++i)
      for (int j = 0; j < 25; ++j) xy += k(a.row(i), b.row(j));
    const double expect = xx / (30 * 29) + yy / (25 * 24) - 2 * xy / (30 * 25);
    const KidReport r = kid(a, b);
    return std::abs(r.mmd2 - expect) < 1e-10 * std::max(1.0, std::abs(expect)) && kid(b, a).mmd2 == r.mmd2;
  });

  suites.push_back({"ks", {}});
  suites.back().checks.emplace_back("kolmogorov tail", [] {
    return std::abs(kolmogorov_survival(1.3581) - 0.05) < 1e-3 && std::abs(kolmogorov_survival(0.8276) - 0.5) < 1e-3;
  });
  suites.back().checks.emplace_back("null calibration", [] {
    Engine rng = make_engine(31, Stream::probes);
    const double r = ks_ratio(standard_normal_matrix(rng, 2000, 64));
    return r <= 7.0 / 64.0;
  });

  suites.push_back({"uturn", {}});
  suites.back().checks.emplace_back("hinge recovery", [] {
    std::vector<int> t{0, 1, 2, 3, 4, 5, 6, 7};
    std::vector<double> y{0, 0, 0, 0, 1, 2, 3, 4};
    const auto knee = detect_knee(t, y);
    return knee && *knee == 3 && !detect_knee(t, {0, 1, 2, 3, 4, 5, 6, 7});
  });

  suites.push_back({"io", {}});
  suites.back().checks.emplace_back("binary round trip", [] {
    Matrix m(3, 2);
    m << 0.5, -1.25, 2.0, 3.5, -0.125, 8.0;
    std::ostringstream out;
    io::write_binary(out, m);
    return io::parse_binary(out.str()) == m;
  });

  return suites;
}

// Prints one line per suite; returns true if every check passed.
inline bool run_selftest(std::ostream& out) {
  bool ok = true;
  for (const auto& suite : selftest_suites()) {
    int passed = 0;
    std::vector<std::string> failed;
    for (const auto& [name, check] : suite.checks) {
      bool result = false;
      try {
        result = check();
      } catch (const std::exception&) {
        result = false;
      }
      if (result) ++passed;
      else failed.push_back(name);
    }
    out << suite.name << ": " << passed << "/" << suite.checks.size() << " passed";
    for (const auto& f : failed) out << "  [failed: " << f << "]";
    out << '\n';
    ok = ok && failed.empty();
  }
  return ok;
}

}  // namespace utd::cli
