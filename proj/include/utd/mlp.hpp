#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "utd/errors.hpp"
#include "utd/io.hpp"
#include "utd/rng.hpp"
#include "utd/schedule.hpp"
#include "utd/score.hpp"
#include "utd/types.hpp"

namespace utd {

enum class Activation : std::uint32_t { silu = 0, identity = 1 };

struct MlpConfig {
  std::vector<int> hidden{128, 128};
  int time_features = 8;  // sin/cos pairs of n/N on a geometric frequency ladder
  Activation activation = Activation::silu;
};

// A DSM regression batch: inputs x_t at steps n, conditional-score targets
// and lambda(n) weights.
struct DsmBatch {
  Matrix x_t;
  std::vector<int> steps;
  Matrix targets;
  Vector weights;

  Eigen::Index size() const { return x_t.rows(); }
};

inline DsmBatch make_dsm_batch(const Matrix& x_t, const Matrix& x0, const std::vector<int>& steps, const Schedule& schedule) {
  if (x_t.rows() != x0.rows() || x_t.cols() != x0.cols() || static_cast<Eigen::Index>(steps.size()) != x_t.rows())
    throw ArgumentError("DSM batch shapes disagree");
  DsmBatch b{x_t, steps, Matrix(x_t.rows(), x_t.cols()), Vector(x_t.rows())};
  for (Eigen::Index i = 0; i < x_t.rows(); ++i) {
    const int n = steps[static_cast<std::size_t>(i)];
    b.targets.row(i) = dsm_target(x_t.row(i).transpose(), x0.row(i).transpose(), n, schedule).transpose();
    b.weights[i] = schedule.lambda(n);
  }
  return b;
}

// Fully connected score network (d + F) -> hidden... -> d with sinusoidal
// time features. Singular at n = 0 by convention since training never
// visits that step.
class MlpScoreModel final : public ScoreField {
 public:
  struct Layer {
    Matrix weight;  // out x in
    Vector bias;
  };

  MlpScoreModel() = default;

  MlpScoreModel(int dim, int steps, const MlpConfig& config, std::uint64_t seed)
      : dim_(dim), steps_(steps), time_features_(config.time_features), activation_(config.activation) {
    if (dim < 1 || steps < 1) throw ArgumentError("model needs dim >= 1 and steps >= 1");
    if (time_features_ < 0 || time_features_ % 2) throw ArgumentError("time feature count must be even");
    std::vector<int> widths{dim + time_features_};
    widths.insert(widths.end(), config.hidden.begin(), config.hidden.end());
    widths.push_back(dim);
    Engine rng = make_engine(seed, Stream::init);
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(widths[l]));
      std::uniform_real_distribution<double> u(-bound, bound);
      Layer layer{Matrix(widths[l + 1], widths[l]), Vector(widths[l + 1])};
      for (Eigen::Index i = 0; i < layer.weight.size(); ++i) layer.weight.data()[i] = u(rng);
      for (Eigen::Index i = 0; i < layer.bias.size(); ++i) layer.bias[i] = u(rng);
      layers_.push_back(std::move(layer));
    }
  }

  using ScoreField::evaluate;

  Eigen::Index dim() const override { return dim_; }
  bool singular_at_zero() const override { return true; }
  std::string id() const override { return "mlp"; }

  int steps() const { return steps_; }
  int time_features() const { return time_features_; }
  Activation activation() const { return activation_; }
  const std::vector<Layer>& layers() const { return layers_; }
  std::vector<Layer>& layers() { return layers_; }

  Matrix evaluate(const Matrix& x, int n) const override {
    return forward(x, std::vector<int>(static_cast<std::size_t>(x.rows()), n));
  }

  Matrix forward(const Matrix& x, const std::vector<int>& steps) const {
    Cache cache;
    run_forward(x, steps, cache);
    return cache.activations.back();
  }

  // Weighted DSM loss (1 / 2B) sum_i lambda_i |s(x_i, n_i) - target_i|^2;
  // fills `gradient` (flattened like parameters()) when non-null.
  double dsm_loss(const DsmBatch& batch, Vector* gradient = nullptr) const {
    Cache cache;
    run_forward(batch.x_t, batch.steps, cache);
    const Matrix residual = cache.activations.back() - batch.targets;
    const double B = static_cast<double>(batch.size());
    const double loss = 0.5 * (residual.rowwise().squaredNorm().cwiseProduct(batch.weights)).sum() / B;
    if (gradient) backward(cache, (residual.array().colwise() * batch.weights.array()).matrix() / B, *gradient);
    return loss;
  }

  Eigen::Index parameter_count() const {
    Eigen::Index count = 0;
    for (const auto& l : layers_) count += l.weight.size() + l.bias.size();
    return count;
  }

  Vector parameters() const {
    Vector p(parameter_count());
    Eigen::Index at = 0;
    for (const auto& l : layers_) {
      p.segment(at, l.weight.size()) = Eigen::Map<const Vector>(l.weight.data(), l.weight.size());
      at += l.weight.size();
      p.segment(at, l.bias.size()) = l.bias;
      at += l.bias.size();
    }
    return p;
  }

  void set_parameters(const Vector& p) {
    if (p.size() != parameter_count()) throw ArgumentError("parameter vector has wrong length");
    Eigen::Index at = 0;
    for (auto& l : layers_) {
      Eigen::Map<Vector>(l.weight.data(), l.weight.size()) = p.segment(at, l.weight.size());
      at += l.weight.size();
      l.bias = p.segment(at, l.bias.size());
      at += l.bias.size();
    }
  }

  Matrix time_embedding(const std::vector<int>& steps) const {
    Matrix t(static_cast<Eigen::Index>(steps.size()), time_features_);
    const int pairs = time_features_ / 2;
    for (std::size_t i = 0; i < steps.size(); ++i) {
      const double s = static_cast<double>(steps[i]) / steps_;
      for (int k = 0; k < pairs; ++k) {
        const double w = 0.5 * std::numbers::pi * std::ldexp(1.0, k);
        t(static_cast<Eigen::Index>(i), 2 * k) = std::sin(w * s);
        t(static_cast<Eigen::Index>(i), 2 * k + 1) = std::cos(w * s);
      }
    }
    return t;
  }

  // Binary checkpoint: "UTDM", version, dim, steps, time features,
  // activation, layer count, then per layer (out, in, weights, biases) as
  // little-endian uint32 / float32.
  void save(std::ostream& out) const {
    out.write("UTDM", 4);
    for (std::uint32_t v : {kCheckpointVersion, static_cast<std::uint32_t>(dim_), static_cast<std::uint32_t>(steps_),
                            static_cast<std::uint32_t>(time_features_), static_cast<std::uint32_t>(activation_),
                            static_cast<std::uint32_t>(layers_.size())})
      io::detail::put_u32(out, v);
    for (const auto& l : layers_) {
      io::detail::put_u32(out, static_cast<std::uint32_t>(l.weight.rows()));
      io::detail::put_u32(out, static_cast<std::uint32_t>(l.weight.cols()));
      for (Eigen::Index i = 0; i < l.weight.size(); ++i) io::detail::put_f32(out, static_cast<float>(l.weight.data()[i]));
      for (Eigen::Index i = 0; i < l.bias.size(); ++i) io::detail::put_f32(out, static_cast<float>(l.bias[i]));
    }
  }

  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw LoadError("cannot write '" + path + "'");
    save(out);
  }

  static MlpScoreModel load(const std::string& path) {
    const std::string bytes = io::detail::read_all(path);
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    std::size_t at = 0;
    auto need = [&](std::size_t n) {
      if (at + n > bytes.size()) throw LoadError(path + ": truncated checkpoint");
    };
    auto u32 = [&] {
      need(4);
      const auto v = io::detail::get_u32(p + at);
      at += 4;
      return v;
    };
    auto f32 = [&] {
      const float f = std::bit_cast<float>(u32());
      if (!std::isfinite(f)) throw LoadError(path + ": non-finite parameter");
      return static_cast<double>(f);
    };
    need(4);
    if (bytes.compare(0, 4, "UTDM") != 0) throw LoadError(path + ": bad checkpoint magic");
    at = 4;
    if (u32() != kCheckpointVersion) throw LoadError(path + ": unsupported checkpoint version");
    MlpScoreModel m;
    m.dim_ = static_cast<int>(u32());
    m.steps_ = static_cast<int>(u32());
    m.time_features_ = static_cast<int>(u32());
    const auto act = u32();
    if (act > 1) throw LoadError(path + ": unknown activation");
    m.activation_ = static_cast<Activation>(act);
    const auto count = u32();
    Eigen::Index expected_in = m.dim_ + m.time_features_;
    for (std::uint32_t l = 0; l < count; ++l) {
      const auto rows = static_cast<Eigen::Index>(u32()), cols = static_cast<Eigen::Index>(u32());
      if (cols != expected_in) throw LoadError(path + ": inconsistent layer shapes");
      Layer layer{Matrix(rows, cols), Vector(rows)};
      for (Eigen::Index i = 0; i < layer.weight.size(); ++i) layer.weight.data()[i] = f32();
      for (Eigen::Index i = 0; i < rows; ++i) layer.bias[i] = f32();
      expected_in = rows;
      m.layers_.push_back(std::move(layer));
    }
    if (count == 0 || expected_in != m.dim_) throw LoadError(path + ": output width does not match dim");
    if (at != bytes.size()) throw LoadError(path + ": trailing bytes");
    return m;
  }

 private:
  static constexpr std::uint32_t kCheckpointVersion = 1;

  struct Cache {
    std::vector<Matrix> pre;          // pre-activations of hidden layers
    std::vector<Matrix> activations;  // input, hidden outputs, network output
  };

  static double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

  Matrix activate(const Matrix& z) const {
    if (activation_ == Activation::identity) return z;
    return z.unaryExpr([](double v) { return v * sigmoid(v); });
  }

  Matrix activation_derivative(const Matrix& z) const {
    if (activation_ == Activation::identity) return Matrix::Ones(z.rows(), z.cols());
    return z.unaryExpr([](double v) {
      const double s = sigmoid(v);
      return s * (1.0 + v * (1.0 - s));
    });
  }

  void run_forward(const Matrix& x, const std::vector<int>& steps, Cache& cache) const {
    if (x.cols() != dim_) throw ArgumentError("model input has wrong dimension");
    Matrix input(x.rows(), dim_ + time_features_);
    input.leftCols(dim_) = x;
    if (time_features_) input.rightCols(time_features_) = time_embedding(steps);
    cache.activations.push_back(std::move(input));
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      Matrix z = cache.activations.back() * layers_[l].weight.transpose();
      z.rowwise() += layers_[l].bias.transpose();
      if (l + 1 == layers_.size()) {
        cache.activations.push_back(std::move(z));
      } else {
        cache.activations.push_back(activate(z));
        cache.pre.push_back(std::move(z));
      }
    }
  }

  void backward(const Cache& cache, Matrix delta, Vector& gradient) const {
    gradient.resize(parameter_count());
    std::vector<Eigen::Index> offsets;
    Eigen::Index at = 0;
    for (const auto& l : layers_) {
      offsets.push_back(at);
      at += l.weight.size() + l.bias.size();
    }
    for (std::size_t l = layers_.size(); l-- > 0;) {
      const Layer& layer = layers_[l];
      const Matrix grad_w = delta.transpose() * cache.activations[l];
      Eigen::Map<Matrix>(gradient.data() + offsets[l], layer.weight.rows(), layer.weight.cols()) = grad_w;
      gradient.segment(offsets[l] + layer.weight.size(), layer.bias.size()) = delta.colwise().sum().transpose();
      if (l > 0) delta = (delta * layer.weight).cwiseProduct(activation_derivative(cache.pre[l - 1]));
    }
  }

  int dim_ = 0;
  int steps_ = 0;
  int time_features_ = 0;
  Activation activation_ = Activation::silu;
  std::vector<Layer> layers_;
};

enum class Optimizer { sgd_momentum, adam };

struct TrainConfig {
  int batch = 128;
  long steps = 20000;
  double learning_rate = 1e-3;
  double momentum = 0.9;  // SGD momentum, or Adam beta1
  double beta2 = 0.999;
  double epsilon = 1e-8;
  Optimizer optimizer = Optimizer::sgd_momentum;
  bool cosine_decay = false;  // anneal the learning rate to zero over `steps`
  std::uint64_t seed = 0;
};

struct TrainResult {
  MlpScoreModel model;
  std::vector<double> loss_trace;
};

// Stochastic minimisation of the lambda-weighted DSM objective with
// n ~ U{1..N}, x_0 ~ data, x_n ~ p(x_n | x_0).
inline TrainResult train_dsm(MlpScoreModel model, const Matrix& data, const Schedule& schedule, const TrainConfig& config) {
  if (config.steps < 0) throw ArgumentError("training steps must be >= 0");
  if (data.cols() != model.dim()) throw ArgumentError("data dimension does not match model");
  if (config.batch < 1) throw ArgumentError("batch must be >= 1");
  TrainResult result;
  result.loss_trace.reserve(static_cast<std::size_t>(config.steps));
  Engine rng = make_engine(config.seed, Stream::training);
  std::uniform_int_distribution<Eigen::Index> pick_row(0, data.rows() - 1);
  std::uniform_int_distribution<int> pick_step(1, schedule.steps());
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto B = config.batch;
  const auto d = data.cols();
  Vector params = model.parameters();
  Vector velocity = Vector::Zero(params.size());
  Vector second = Vector::Zero(params.size());
  Vector grad;
  DsmBatch batch{Matrix(B, d), std::vector<int>(static_cast<std::size_t>(B)), Matrix(B, d), Vector(B)};
  for (long step = 0; step < config.steps; ++step) {
    for (int i = 0; i < B; ++i) {
      const Eigen::Index row = pick_row(rng);
      const int n = pick_step(rng);
      const double phi = schedule.phi(n, 0);
      const double sd = std::sqrt(1.0 - phi);
      batch.steps[static_cast<std::size_t>(i)] = n;
      batch.weights[i] = 1.0 - phi;
      for (Eigen::Index j = 0; j < d; ++j) {
        const double z = normal(rng);
        batch.x_t(i, j) = std::sqrt(phi) * data(row, j) + sd * z;
        batch.targets(i, j) = -z / sd;
      }
    }
    const double loss = model.dsm_loss(batch, &grad);
    if (!std::isfinite(loss) || !grad.allFinite())
      throw TrainingFailure("DSM loss became non-finite at step " + std::to_string(step), step);
    result.loss_trace.push_back(loss);
    double lr = config.learning_rate;
    if (config.cosine_decay)
      lr *= 0.5 * (1.0 + std::cos(std::numbers::pi * static_cast<double>(step) / static_cast<double>(config.steps)));
    if (config.optimizer == Optimizer::sgd_momentum) {
      velocity = config.momentum * velocity + grad;
      params -= lr * velocity;
    } else {
      const double t = static_cast<double>(step + 1);
      velocity = config.momentum * velocity + (1.0 - config.momentum) * grad;
      second = config.beta2 * second + (1.0 - config.beta2) * grad.cwiseAbs2();
      const double c1 = 1.0 - std::pow(config.momentum, t), c2 = 1.0 - std::pow(config.beta2, t);
      params.array() -= lr * (velocity.array() / c1) / ((second.array() / c2).sqrt() + config.epsilon);
    }
    model.set_parameters(params);
  }
  result.model = std::move(model);
  return result;
}

// Largest disagreement between backprop and central-difference gradients
// of the DSM loss on `probes`. Each component's error is relative to
// max(|backprop|, |numeric|, 1e-3 * largest backprop component).
inline double finite_diff_check(const MlpScoreModel& model, const DsmBatch& probes, double epsilon) {
  if (!(epsilon >= 1e-6 && epsilon <= 1e-3)) throw ArgumentError("epsilon must lie in [1e-6, 1e-3]");
  Vector analytic;
  model.dsm_loss(probes, &analytic);
  MlpScoreModel probe = model;
  Vector params = model.parameters();
  const double floor = 1e-3 * analytic.cwiseAbs().maxCoeff();
  double worst = 0.0;
  for (Eigen::Index i = 0; i < params.size(); ++i) {
    const double saved = params[i];
    params[i] = saved + epsilon;
    probe.set_parameters(params);
    const double up = probe.dsm_loss(probes);
    params[i] = saved - epsilon;
    probe.set_parameters(params);
    const double down = probe.dsm_loss(probes);
    params[i] = saved;
    const double numeric = (up - down) / (2.0 * epsilon);
    const double scale = std::max({std::abs(analytic[i]), std::abs(numeric), floor});
    if (scale > 0.0) worst = std::max(worst, std::abs(analytic[i] - numeric) / scale);
  }
  return worst;
}

// sqrt( sum lambda |model - reference|^2 / sum lambda |reference|^2 ) over
// `steps`, with per_step points x_n ~ p(x_n | x_0) per step and x_0 drawn
// from the rows of `data`.
inline double weighted_relative_error(const ScoreField& model, const ScoreField& reference, const Matrix& data,
                                      const Schedule& schedule, const std::vector<int>& steps, Eigen::Index per_step,
                                      std::uint64_t seed) {
  if (model.dim() != reference.dim() || data.cols() != model.dim()) throw ArgumentError("score dimensions disagree");
  if (per_step < 1 || data.rows() < 1) throw ArgumentError("weighted_relative_error needs samples");
  Engine rng = make_engine(seed, Stream::probes);
  std::uniform_int_distribution<Eigen::Index> pick_row(0, data.rows() - 1);
  std::normal_distribution<double> normal(0.0, 1.0);
  double err = 0.0, norm = 0.0;
  for (int n : steps) {
    if (n < 1 || n > schedule.steps()) throw RangeError("error grid steps must lie in [1, N]");
    const double phi = schedule.phi(n, 0);
    Matrix x(per_step, data.cols());
    for (Eigen::Index i = 0; i < per_step; ++i) {
      const Eigen::Index row = pick_row(rng);
      for (Eigen::Index j = 0; j < x.cols(); ++j) x(i, j) = std::sqrt(phi) * data(row, j) + std::sqrt(1.0 - phi) * normal(rng);
    }
    const Matrix a = model.evaluate(x, n), b = reference.evaluate(x, n);
    err += schedule.lambda(n) * (a - b).squaredNorm();
    norm += schedule.lambda(n) * b.squaredNorm();
  }
  if (!(norm > 0.0)) throw ArgumentError("reference score vanishes on the grid");
  return std::sqrt(err / norm);
}

}  // namespace utd
