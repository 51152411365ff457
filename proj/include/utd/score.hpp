#pragma once

#include <cmath>
#include <numbers>
#include <string>

#include "utd/data.hpp"
#include "utd/errors.hpp"
#include "utd/schedule.hpp"
#include "utd/types.hpp"

namespace utd {

// A time-dependent vector field s(x, n) approximating grad log p_n(x).
class ScoreField {
 public:
  virtual ~ScoreField() = default;

  virtual Eigen::Index dim() const = 0;

  // Row-wise evaluation of a batch (M x d) at step n.
  virtual Matrix evaluate(const Matrix& x, int n) const = 0;

  // True when the field is not meaningful at n = 0 (trained models).
  virtual bool singular_at_zero() const { return false; }

  virtual std::string id() const = 0;

  Vector evaluate(const Vector& x, int n) const {
    Matrix row = x.transpose();
    return evaluate(row, n).row(0).transpose();
  }
};

// Exact score of a Gaussian mixture pushed through the VP kernel: the
// marginal at step n is again a mixture with means sqrt(Phi) mu_k and
// variances Phi sigma_k^2 + 1 - Phi.
class GaussianMixtureScore final : public ScoreField {
 public:
  GaussianMixtureScore(GaussianMixtureSpec spec, Schedule schedule) : spec_(std::move(spec)), schedule_(std::move(schedule)) {
    spec_.validate();
  }

  using ScoreField::evaluate;

  Eigen::Index dim() const override { return spec_.dim(); }
  std::string id() const override { return "gaussian_mixture_analytic"; }
  const GaussianMixtureSpec& spec() const { return spec_; }
  const Schedule& schedule() const { return schedule_; }

  Matrix evaluate(const Matrix& x, int n) const override {
    const Marginal m = marginal(n);
    const auto K = spec_.components();
    Matrix out(x.rows(), x.cols());
    Vector logits(K);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      for (Eigen::Index k = 0; k < K; ++k) logits[k] = component_log_density(m, k, x.row(i));
      const double top = logits.maxCoeff();
      const Vector w = (logits.array() - top).exp();
      const double total = w.sum();
      out.row(i).setZero();
      for (Eigen::Index k = 0; k < K; ++k)
        out.row(i) -= (w[k] / total) * (x.row(i) - m.means.row(k)) / m.variances[k];
    }
    return out;
  }

  // log p_n(x), stabilised with log-sum-exp.
  double log_density(const Vector& x, int n) const {
    const Marginal m = marginal(n);
    const auto K = spec_.components();
    Vector logits(K);
    for (Eigen::Index k = 0; k < K; ++k) logits[k] = component_log_density(m, k, x.transpose());
    const double top = logits.maxCoeff();
    return top + std::log((logits.array() - top).exp().sum());
  }

 private:
  struct Marginal {
    Matrix means;
    Vector variances;
    Vector log_weights;
  };

  Marginal marginal(int n) const {
    const double phi = schedule_.phi(n, 0);
    Marginal m;
    m.means = std::sqrt(phi) * spec_.means;
    m.variances = (phi * spec_.variances.array() + (1.0 - phi)).matrix();
    m.log_weights = spec_.weights.array().log().matrix();
    return m;
  }

  double component_log_density(const Marginal& m, Eigen::Index k, const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
    const double d = static_cast<double>(spec_.dim());
    const double v = m.variances[k];
    return m.log_weights[k] - 0.5 * d * std::log(2.0 * std::numbers::pi * v) - 0.5 * (x - m.means.row(k)).squaredNorm() / v;
  }

  GaussianMixtureSpec spec_;
  Schedule schedule_;
};

inline Vector gm_score(const GaussianMixtureSpec& spec, const Schedule& schedule, const Vector& x, int n) {
  return GaussianMixtureScore(spec, schedule).evaluate(x, n);
}

// Conditional score grad log p(x_t | x_0) = -(x_t - sqrt(Phi) x_0) / (1 - Phi).
inline Vector dsm_target(const Vector& x_t, const Vector& x0, int n, const Schedule& schedule) {
  if (n < 1) throw RangeError("conditional score is singular at n = 0");
  const double phi = schedule.phi(n, 0);
  return -(x_t - std::sqrt(phi) * x0) / (1.0 - phi);
}

}  // namespace utd
