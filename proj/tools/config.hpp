#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "utd/data.hpp"
#include "utd/errors.hpp"
#include "utd/kid.hpp"
#include "utd/mlp.hpp"
#include "utd/reverse.hpp"
#include "utd/schedule.hpp"

namespace utd::cli {

using nlohmann::json;

// Every violation found while validating a config, one per line.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::vector<std::string>& problems) : Error(join(problems)), problems_(problems) {}
  const std::vector<std::string>& problems() const { return problems_; }

 private:
  static std::string join(const std::vector<std::string>& p) {
    std::string s = "invalid configuration:";
    for (const auto& line : p) s += "\n  - " + line;
    return s;
  }
  std::vector<std::string> problems_;
};

inline const char* kSeedNames[] = {"data", "forward", "reverse", "train", "kid", "uturn"};

inline json default_config() {
  return json::parse(R"({
    "dataset": {"kind": "gaussian_mixture", "dim": 2, "first_weight": 0.35, "variance": 0.15,
                "builtin": "two_moons", "path": "", "samples": 10000, "holdout": 2000, "normalization": "auto"},
    "schedule": {"kind": "linear", "b1": 1e-4, "b2": 0.02, "N": 1000, "delta": 1.0},
    "score": {"kind": "analytic", "path": "",
              "model": {"hidden": [128, 128], "time_features": 8, "activation": "silu"},
              "train": {"optimizer": "sgd_momentum", "steps": 20000, "batch": 128, "learning_rate": 0.01,
                        "momentum": 0.9, "cosine_decay": false, "error_grid": 20, "error_samples": 500}},
    "simulation": {"M": 10000, "grid_points": 20, "integrator": "euler_maruyama"},
    "diagnostics": {"autocorr": true, "half_decay": true, "score_norms": true, "ks": true,
                    "ks_alpha": 0.05, "plateau_window": 50, "plateau_tol": 0.02},
    "kid": {"resamples": 10, "feature": "identity", "projection_dim": 64, "real": "", "generated": ""},
    "uturn": {"turn_steps": [], "M": 2000}
  })");
}

inline json parse_override_value(const std::string& text) {
  json v = json::parse(text, nullptr, false);
  return v.is_discarded() ? json(text) : v;
}

// key=value with a dotted key; the value is read as JSON when it parses,
// otherwise as a string.
inline void apply_override(json& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError({"override '" + assignment + "' is not key=value"});
  std::string pointer;
  std::string key = assignment.substr(0, eq);
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigError({"override key '" + key + "' has an empty component"});
    pointer += "/" + part;
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  config[json::json_pointer(pointer)] = parse_override_value(assignment.substr(eq + 1));
}

inline json load_config(const std::string& path, const std::vector<std::string>& overrides) {
  json config = default_config();
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw ConfigError({"cannot open config file " + path});
    json user = json::parse(in, nullptr, false, true);
    if (user.is_discarded() || !user.is_object()) throw ConfigError({path + " is not a JSON object"});
    config.merge_patch(user);
  }
  for (const auto& o : overrides) apply_override(config, o);
  return config;
}

// Typed view over a validated config.
struct Experiment {
  json raw;
  ScheduleSpec schedule;
  std::string dataset_kind;
  std::string score_kind;
  Integrator integrator = Integrator::euler_maruyama;
  std::uint64_t seed(const std::string& name) const { return raw["seeds"][name].get<std::uint64_t>(); }
};

namespace detail {

class Checker {
 public:
  explicit Checker(const json& root) : root_(root) {}

  const json* at(const std::string& pointer) {
    const json::json_pointer p(pointer);
    if (!root_.contains(p)) {
      problems.push_back(pointer + " is missing");
      return nullptr;
    }
    return &root_.at(p);
  }

  template <class T>
  std::optional<T> get(const std::string& pointer) {
    const json* v = at(pointer);
    if (!v) return std::nullopt;
    try {
      return v->get<T>();
    } catch (const json::exception&) {
      problems.push_back(pointer + " has the wrong type");
      return std::nullopt;
    }
  }

  void require(bool ok, const std::string& message) {
    if (!ok) problems.push_back(message);
  }

  std::vector<std::string> problems;

 private:
  const json& root_;
};

}  // namespace detail

inline Experiment validate_config(const json& config) {
  detail::Checker c(config);
  Experiment e;
  e.raw = config;

  if (!config.contains("seeds") || !config["seeds"].is_object()) {
    c.problems.push_back("/seeds is missing (seeds are mandatory)");
  } else {
    for (const char* name : kSeedNames) {
      const auto s = std::string("/seeds/") + name;
      if (!config["seeds"].contains(name)) {
        c.problems.push_back(s + " is missing");
      } else if (!config["seeds"][name].is_number_integer() || config["seeds"][name].get<long long>() < 0) {
        c.problems.push_back(s + " must be a non-negative integer");
      }
    }
  }

  // schedule
  if (auto kind = c.get<std::string>("/schedule/kind")) {
    try {
      e.schedule.kind = schedule_kind_from_string(*kind);
    } catch (const Error&) {
      c.problems.push_back("/schedule/kind '" + *kind + "' is not linear, sigmoid or cosine");
    }
  }
  auto b1 = c.get<double>("/schedule/b1");
  auto b2 = c.get<double>("/schedule/b2");
  auto N = c.get<int>("/schedule/N");
  auto delta = c.get<double>("/schedule/delta");
  if (b1 && b2) {
    c.require(*b1 > 0 && *b1 < 1, "/schedule/b1 must lie in (0, 1)");
    c.require(*b2 > 0 && *b2 < 1, "/schedule/b2 must lie in (0, 1)");
    e.schedule.b1 = *b1;
    e.schedule.b2 = *b2;
  }
  if (N) {
    c.require(*N >= 1, "/schedule/N must be >= 1");
    e.schedule.steps = *N;
  }
  if (delta) {
    c.require(*delta > 0, "/schedule/delta must be positive");
    e.schedule.delta = *delta;
  }

  // dataset
  auto kind = c.get<std::string>("/dataset/kind");
  if (kind) {
    e.dataset_kind = *kind;
    if (*kind == "gaussian_mixture") {
      auto dim = c.get<int>("/dataset/dim");
      auto w = c.get<double>("/dataset/first_weight");
      auto v = c.get<double>("/dataset/variance");
      if (dim) c.require(*dim >= 1, "/dataset/dim must be >= 1");
      if (w) c.require(*w > 0 && *w < 1, "/dataset/first_weight must lie in (0, 1)");
      if (v) c.require(*v > 0 && *v < 1, "/dataset/variance must lie in (0, 1)");
    } else if (*kind == "builtin") {
      if (auto b = c.get<std::string>("/dataset/builtin")) {
        try {
          builtin_from_string(*b);
        } catch (const Error&) {
          c.problems.push_back("/dataset/builtin '" + *b + "' is unknown");
        }
      }
    } else if (*kind == "file") {
      if (auto p = c.get<std::string>("/dataset/path"))
        c.require(!p->empty() && std::filesystem::exists(*p), "/dataset/path '" + *p + "' does not exist");
    } else {
      c.problems.push_back("/dataset/kind must be gaussian_mixture, builtin or file");
    }
  }
  auto samples = c.get<long>("/dataset/samples");
  auto holdout = c.get<long>("/dataset/holdout");
  if (samples) c.require(*samples >= 2, "/dataset/samples must be >= 2");
  if (holdout) c.require(*holdout >= 2, "/dataset/holdout must be >= 2");
  if (auto norm = c.get<std::string>("/dataset/normalization"))
    c.require(*norm == "auto" || *norm == "per_coordinate" || *norm == "global",
              "/dataset/normalization must be auto, per_coordinate or global");

  // score
  if (auto s = c.get<std::string>("/score/kind")) {
    e.score_kind = *s;
    if (*s == "analytic") {
      c.require(!kind || *kind == "gaussian_mixture", "/score/kind analytic needs a gaussian_mixture dataset");
      auto norm = config.value(json::json_pointer("/dataset/normalization"), std::string("auto"));
      c.require(norm != "per_coordinate", "/score/kind analytic needs global (or auto) normalization");
    } else if (*s == "checkpoint") {
      if (auto p = c.get<std::string>("/score/path"))
        c.require(!p->empty() && std::filesystem::exists(*p), "/score/path '" + *p + "' does not exist");
    } else if (*s != "train") {
      c.problems.push_back("/score/kind must be analytic, train or checkpoint");
    }
  }
  if (auto hidden = c.get<std::vector<int>>("/score/model/hidden"))
    for (int h : *hidden) c.require(h >= 1, "/score/model/hidden widths must be >= 1");
  if (auto f = c.get<int>("/score/model/time_features")) c.require(*f >= 0 && *f % 2 == 0, "/score/model/time_features must be even and >= 0");
  if (auto a = c.get<std::string>("/score/model/activation")) c.require(*a == "silu" || *a == "identity", "/score/model/activation must be silu or identity");
  if (auto o = c.get<std::string>("/score/train/optimizer")) c.require(*o == "sgd_momentum" || *o == "adam", "/score/train/optimizer must be sgd_momentum or adam");
  if (auto v = c.get<long>("/score/train/steps")) c.require(*v >= 0, "/score/train/steps must be >= 0");
  if (auto v = c.get<int>("/score/train/batch")) c.require(*v >= 1, "/score/train/batch must be >= 1");
  if (auto v = c.get<double>("/score/train/learning_rate")) c.require(*v > 0, "/score/train/learning_rate must be positive");
  c.get<double>("/score/train/momentum");
  c.get<bool>("/score/train/cosine_decay");
  if (auto v = c.get<int>("/score/train/error_grid")) c.require(*v >= 1, "/score/train/error_grid must be >= 1");
  if (auto v = c.get<long>("/score/train/error_samples")) c.require(*v >= 1, "/score/train/error_samples must be >= 1");

  // simulation
  if (auto M = c.get<long>("/simulation/M")) c.require(*M >= 2, "/simulation/M must be >= 2");
  if (auto g = c.get<int>("/simulation/grid_points")) c.require(*g >= 1, "/simulation/grid_points must be >= 1");
  if (auto i = c.get<std::string>("/simulation/integrator")) {
    if (*i == "euler_maruyama") e.integrator = Integrator::euler_maruyama;
    else if (*i == "ancestral") e.integrator = Integrator::ancestral;
    else c.problems.push_back("/simulation/integrator must be euler_maruyama or ancestral");
  }

  // diagnostics
  for (const char* flag : {"autocorr", "half_decay", "score_norms", "ks"}) c.get<bool>(std::string("/diagnostics/") + flag);
  if (auto a = c.get<double>("/diagnostics/ks_alpha")) c.require(*a > 0 && *a < 1, "/diagnostics/ks_alpha must lie in (0, 1)");
  if (auto w = c.get<int>("/diagnostics/plateau_window")) c.require(*w >= 1, "/diagnostics/plateau_window must be >= 1");
  if (auto t = c.get<double>("/diagnostics/plateau_tol")) c.require(*t > 0, "/diagnostics/plateau_tol must be positive");

  // kid
  if (auto r = c.get<int>("/kid/resamples")) c.require(*r >= 0, "/kid/resamples must be >= 0");
  if (auto f = c.get<std::string>("/kid/feature")) c.require(*f == "identity" || *f == "random_projection", "/kid/feature must be identity or random_projection");
  if (auto p = c.get<long>("/kid/projection_dim")) c.require(*p >= 1, "/kid/projection_dim must be >= 1");
  for (const char* key : {"real", "generated"}) {
    if (auto p = c.get<std::string>(std::string("/kid/") + key))
      c.require(p->empty() || std::filesystem::exists(*p), std::string("/kid/") + key + " '" + *p + "' does not exist");
  }

  // uturn
  if (auto steps = c.get<std::vector<int>>("/uturn/turn_steps")) {
    for (int n : *steps) c.require(n >= 1 && (!N || n <= *N), "/uturn/turn_steps entries must lie in [1, N]");
    c.require(std::is_sorted(steps->begin(), steps->end()) && std::adjacent_find(steps->begin(), steps->end()) == steps->end(),
              "/uturn/turn_steps must be strictly increasing");
  }
  if (auto M = c.get<long>("/uturn/M")) {
    c.require(*M >= 2, "/uturn/M must be >= 2");
    if (samples) c.require(*M <= *samples, "/uturn/M must not exceed /dataset/samples");
  }

  if (!c.problems.empty()) throw ConfigError(c.problems);
  return e;
}

inline MlpConfig model_config(const json& raw) {
  MlpConfig m;
  m.hidden = raw["score"]["model"]["hidden"].get<std::vector<int>>();
  m.time_features = raw["score"]["model"]["time_features"].get<int>();
  m.activation = raw["score"]["model"]["activation"] == "identity" ? Activation::identity : Activation::silu;
  return m;
}

inline TrainConfig train_config(const Experiment& e) {
  const json& t = e.raw["score"]["train"];
  TrainConfig c;
  c.optimizer = t["optimizer"] == "adam" ? Optimizer::adam : Optimizer::sgd_momentum;
  c.steps = t["steps"].get<long>();
  c.batch = t["batch"].get<int>();
  c.learning_rate = t["learning_rate"].get<double>();
  c.momentum = t["momentum"].get<double>();
  c.cosine_decay = t["cosine_decay"].get<bool>();
  c.seed = e.seed("train");
  return c;
}

inline FeatureSpec feature_spec(const Experiment& e) {
  FeatureSpec f;
  f.mode = e.raw["kid"]["feature"] == "random_projection" ? FeatureMode::random_projection : FeatureMode::identity;
  f.projection_dim = e.raw["kid"]["projection_dim"].get<Eigen::Index>();
  f.seed = e.seed("kid");
  return f;
}

inline KidOptions kid_options(const Experiment& e) {
  KidOptions k;
  k.resamples = e.raw["kid"]["resamples"].get<int>();
  k.seed = e.seed("kid");
  return k;
}

}  // namespace utd::cli
