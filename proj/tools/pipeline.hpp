#pragma once

#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "config.hpp"
#include "run_dir.hpp"
#include "utd/data.hpp"
#include "utd/io.hpp"
#include "utd/mlp.hpp"
#include "utd/score.hpp"
#include "utd/series.hpp"

namespace utd::cli {

// Normalised training rows and holdout rows, plus the analytic mixture in
// normalised coordinates when the data come from one.
struct Data {
  Dataset train;
  Matrix holdout;
  std::optional<GaussianMixtureSpec> mixture;
};

inline Data build_data(const Experiment& e) {
  const json& d = e.raw["dataset"];
  const auto samples = d["samples"].get<Eigen::Index>();
  const auto holdout = d["holdout"].get<Eigen::Index>();
  const std::uint64_t seed = e.seed("data");
  Dataset all;
  std::optional<GaussianMixtureSpec> spec;
  if (e.dataset_kind == "gaussian_mixture") {
    spec = GaussianMixtureSpec::normalized_two_component(d["dim"].get<int>(), d["first_weight"].get<double>(),
                                                         d["variance"].get<double>());
    all = generate(*spec, samples + holdout, seed);
  } else if (e.dataset_kind == "builtin") {
    all = generate(builtin_from_string(d["builtin"].get<std::string>()), samples + holdout, seed);
  } else {
    all.name = d["path"].get<std::string>();
    all.samples = io::load_samples(all.name);
    if (all.samples.rows() < samples + holdout)
      throw ConfigError({"/dataset/path has " + std::to_string(all.samples.rows()) + " rows, fewer than samples + holdout"});
  }
  std::string mode = d["normalization"].get<std::string>();
  if (mode == "auto") mode = e.dataset_kind == "gaussian_mixture" ? "global" : "per_coordinate";

  Dataset raw_train{all.name, all.samples.topRows(samples), {}};
  Data out;
  out.train = normalize(raw_train, mode == "global" ? ScaleMode::global : ScaleMode::per_coordinate);
  const Normalization& n = out.train.normalization;
  out.holdout = all.samples.middleRows(samples, holdout);
  out.holdout = (out.holdout.rowwise() - n.shift.transpose()).array().rowwise() / n.scale.transpose().array();
  if (spec) out.mixture = spec->affine(n.shift, n.scale[0]);
  return out;
}

inline void write_columns(RunDir& run, const std::string& name, const std::string& header,
                          const std::vector<std::vector<double>>& columns, const std::vector<int>& steps) {
  std::ofstream out(run.file(name));
  out << header << '\n';
  for (std::size_t i = 0; i < steps.size(); ++i) {
    out << steps[i];
    for (const auto& c : columns) out << ',' << format_real(c[i]);
    out << '\n';
  }
  run.add(name);
}

inline void write_series(RunDir& run, const std::string& name, const DiagnosticSeries& s) {
  io::save_series_csv(run.file(name).string(), s);
  run.add(name);
}

inline void write_samples(RunDir& run, const std::string& name, const Matrix& m) {
  io::save_csv(run.file(name).string(), m);
  run.add(name);
}

inline void write_json(RunDir& run, const std::string& name, const json& j) {
  std::ofstream(run.file(name)) << j.dump(2) << '\n';
  run.add(name);
}

// Builds the configured score. A "train" score is fitted here and its
// checkpoint and loss trace are written into the run directory.
inline std::unique_ptr<ScoreField> build_score(const Experiment& e, const Data& data, const Schedule& schedule, RunDir& run) {
  if (e.score_kind == "analytic") return std::make_unique<GaussianMixtureScore>(*data.mixture, schedule);
  if (e.score_kind == "checkpoint") {
    auto model = MlpScoreModel::load(e.raw["score"]["path"].get<std::string>());
    if (model.dim() != data.train.dim()) throw ConfigError({"/score/path checkpoint dimension does not match the data"});
    if (model.steps() != schedule.steps()) throw ConfigError({"/score/path checkpoint was trained for a different N"});
    return std::make_unique<MlpScoreModel>(std::move(model));
  }
  MlpScoreModel init(static_cast<int>(data.train.dim()), schedule.steps(), model_config(e.raw), e.seed("train"));
  TrainResult result = train_dsm(std::move(init), data.train.samples, schedule, train_config(e));
  result.model.save(run.file("model.bin").string());
  run.add("model.bin");
  {
    std::ofstream out(run.file("loss.csv"));
    out << "step,loss\n";
    for (std::size_t i = 0; i < result.loss_trace.size(); ++i) out << i << ',' << format_real(result.loss_trace[i]) << '\n';
  }
  run.add("loss.csv");
  return std::make_unique<MlpScoreModel>(std::move(result.model));
}

}  // namespace utd::cli
