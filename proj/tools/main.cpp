#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "config.hpp"
#include "pipeline.hpp"
#include "plot.hpp"
#include "run_dir.hpp"
#include "selftest.hpp"
#include "utd/diagnostics.hpp"
#include "utd/forward.hpp"
#include "utd/kid.hpp"
#include "utd/parallel.hpp"
#include "utd/reverse.hpp"
#include "utd/uturn.hpp"

namespace {

using namespace utd;
using namespace utd::cli;

enum Exit { kOk = 0, kFailure = 1, kConfig = 2, kNumerical = 3, kSelftest = 4 };

struct Options {
  std::string config;
  std::vector<std::string> overrides;
  std::string out = "runs";
  int threads = 0;
  bool plots = false;
  std::vector<std::string> runs;  // report inputs
};

std::vector<double> column(const DiagnosticSeries& s, bool errors = false) { return errors ? s.stderrs : s.values; }

Matrix forward_initial(const Experiment& e, const Data& data) {
  const auto M = e.raw["simulation"]["M"].get<Eigen::Index>();
  if (M > data.train.size()) throw ConfigError({"/simulation/M exceeds /dataset/samples"});
  return data.train.samples.topRows(M);
}

std::vector<int> record_grid(const Experiment& e, const Schedule& schedule) {
  return step_grid(schedule.steps(), e.raw["simulation"]["grid_points"].get<int>());
}

PathEnsemble run_reverse_from_noise(const Experiment& e, const ScoreField& score, const Schedule& schedule,
                                    const std::vector<int>& grid) {
  ReverseRunSpec spec;
  spec.start_step = schedule.steps();
  spec.samples = e.raw["simulation"]["M"].get<Eigen::Index>();
  spec.score = &score;
  spec.schedule = &schedule;
  spec.record_steps = grid;
  spec.seed = e.seed("reverse");
  spec.integrator = e.integrator;
  return simulate_reverse(spec);
}

void write_forward_autocorr(RunDir& run, const PathEnsemble& ens, const Schedule& schedule, double m2) {
  const auto& grid = ens.record_steps;
  const int N = schedule.steps();
  const auto c0 = empirical_autocorr(ens, 0, grid);
  const auto cT = empirical_autocorr(ens, N, grid);
  const auto c0_exact = forward_autocorr_closed_form(schedule, AutocorrAnchor::from_zero, m2);
  const auto cT_exact = forward_autocorr_closed_form(schedule, AutocorrAnchor::from_T, m2);
  std::vector<double> e0, eT;
  for (int n : grid) {
    e0.push_back(c0_exact.at(n));
    eT.push_back(cT_exact.at(n));
  }
  write_columns(run, "autocorr_from_zero.csv", "n,value,stderr,closed_form", {column(c0), column(c0, true), e0}, grid);
  write_columns(run, "autocorr_from_T.csv", "n,value,stderr,closed_form", {column(cT), column(cT, true), eT}, grid);
}

int cmd_forward(const Experiment& e, RunDir& run) {
  const Schedule schedule(e.schedule);
  const Data data = build_data(e);
  const Matrix initial = forward_initial(e, data);
  const auto grid = record_grid(e, schedule);
  const PathEnsemble ens = simulate_forward(initial, schedule, grid, e.seed("forward"));
  {
    std::ofstream out(run.file("mean_std.csv"));
    write_mean_std_csv(out, schedule);
  }
  run.add("mean_std.csv");

  const double m2 = initial.squaredNorm() / static_cast<double>(initial.size());
  std::vector<double> moment, moment_se, exact;
  for (int n : grid) {
    const Vector per_sample = ens.at_step(n).rowwise().squaredNorm() / static_cast<double>(initial.cols());
    const double mean = per_sample.mean();
    const double var = (per_sample.array() - mean).square().sum() / static_cast<double>(per_sample.size() - 1);
    moment.push_back(mean);
    moment_se.push_back(std::sqrt(var / static_cast<double>(per_sample.size())));
    exact.push_back(schedule.phi(n, 0) * (m2 - 1.0) + 1.0);
  }
  write_columns(run, "forward_moments.csv", "n,second_moment,stderr,closed_form", {moment, moment_se, exact}, grid);
  if (e.raw["diagnostics"]["autocorr"].get<bool>()) write_forward_autocorr(run, ens, schedule, m2);
  if (e.raw["diagnostics"]["ks"].get<bool>())
    write_series(run, "ks_forward.csv", ks_series(ens, e.raw["diagnostics"]["ks_alpha"].get<double>()));
  save_ensemble(run.file("forward_ensemble").string(), ens);
  run.add("forward_ensemble.bin");
  run.add("forward_ensemble.json");
  return kOk;
}

int cmd_train(const Experiment& e, RunDir& run) {
  const Schedule schedule(e.schedule);
  const Data data = build_data(e);
  Experiment train = e;
  train.score_kind = "train";
  auto score = build_score(train, data, schedule, run);
  json summary{{"parameters", static_cast<const MlpScoreModel&>(*score).parameter_count()}};
  if (data.mixture) {
    const GaussianMixtureScore reference(*data.mixture, schedule);
    std::vector<int> grid;
    for (int n : step_grid(schedule.steps(), e.raw["score"]["train"]["error_grid"].get<int>()))
      if (n >= 1) grid.push_back(n);
    summary["weighted_relative_error"] =
        weighted_relative_error(*score, reference, data.holdout, schedule, grid,
                                e.raw["score"]["train"]["error_samples"].get<Eigen::Index>(), e.seed("train") + 1);
    summary["error_grid"] = grid;
  }
  write_json(run, "summary.json", summary);
  return kOk;
}

int cmd_reverse(const Experiment& e, RunDir& run) {
  const Schedule schedule(e.schedule);
  const Data data = build_data(e);
  auto score = build_score(e, data, schedule, run);
  const auto grid = record_grid(e, schedule);
  const PathEnsemble ens = run_reverse_from_noise(e, *score, schedule, grid);
  const Matrix& generated = ens.at_step(0);
  write_samples(run, "samples.csv", generated);
  save_ensemble(run.file("reverse_ensemble").string(), ens);
  run.add("reverse_ensemble.bin");
  run.add("reverse_ensemble.json");

  json summary{{"excluded", ens.excluded.size()}, {"samples", generated.rows()}};
  const FeatureSpec feature = feature_spec(e);
  summary["kid_vs_holdout"] =
      kid(feature_map(data.holdout, feature), feature_map(generated, feature), kid_options(e), feature.id()).to_json();
  if (data.mixture) {
    const Vector occ = component_occupancy(*data.mixture, generated);
    std::ofstream out(run.file("occupancy.csv"));
    out << "component,weight,occupancy\n";
    for (Eigen::Index k = 0; k < occ.size(); ++k)
      out << k << ',' << format_real(data.mixture->weights[k]) << ',' << format_real(occ[k]) << '\n';
    run.add("occupancy.csv");
  }
  if (e.raw["diagnostics"]["autocorr"].get<bool>()) {
    const auto cr = reverse_autocorr(ens, schedule.steps(), grid);
    const auto exact = forward_autocorr_closed_form(schedule, AutocorrAnchor::from_T, 1.0);
    std::vector<double> ex;
    for (int n : grid) ex.push_back(exact.at(n));
    write_columns(run, "autocorr_reverse.csv", "n,value,stderr,forward_closed_form", {column(cr), column(cr, true), ex}, grid);
  }
  if (e.raw["diagnostics"]["ks"].get<bool>())
    write_series(run, "ks_reverse.csv", ks_series(ens, e.raw["diagnostics"]["ks_alpha"].get<double>()));
  write_json(run, "summary.json", summary);
  return kOk;
}

json plateau_json(const DiagnosticSeries& s, const json& diag) {
  const auto step = plateau_step(s, diag["plateau_window"].get<int>(), diag["plateau_tol"].get<double>());
  return step ? json(*step) : json("none");
}

int cmd_diagnose(const Experiment& e, RunDir& run) {
  const Schedule schedule(e.schedule);
  const Data data = build_data(e);
  auto score = build_score(e, data, schedule, run);
  const json& diag = e.raw["diagnostics"];
  std::vector<int> grid = record_grid(e, schedule);
  if (std::find(grid.begin(), grid.end(), 1) == grid.end()) grid.insert(grid.begin() + 1, 1);
  const Matrix initial = forward_initial(e, data);
  const PathEnsemble fwd = simulate_forward(initial, schedule, grid, e.seed("forward"));
  const PathEnsemble rev = run_reverse_from_noise(e, *score, schedule, grid);
  json summary = json::object();

  if (diag["autocorr"].get<bool>()) {
    const int N = schedule.steps();
    const auto cf = empirical_autocorr(fwd, N, grid);
    const auto cr = reverse_autocorr(rev, N, grid);
    write_columns(run, "autocorr_forward_vs_reverse.csv", "n,forward,stderr_forward,reverse,stderr_reverse",
                  {column(cf), column(cf, true), column(cr), column(cr, true)}, grid);
  }
  if (diag["half_decay"].get<bool>()) {
    std::vector<DiagnosticSeries> family;
    for (auto& s : reverse_autocorr_family(rev))
      if (s.size() >= 2) family.push_back(std::move(s));
    const auto delta = half_decay_time(family);
    write_series(run, "half_decay.csv", delta);
    summary["half_decay_censored"] = delta.metadata.at("censored");
  }
  if (diag["score_norms"].get<bool>()) {
    const auto curves = score_norm_curves(*score, fwd, schedule);
    write_series(run, "score_norm_S.csv", curves.unweighted);
    write_series(run, "score_norm_M.csv", curves.weighted);
    summary["score_norm_reference_step"] = curves.unweighted.metadata.at("reference_step");
    summary["plateau_S"] = plateau_json(curves.unweighted, diag);
    summary["plateau_M"] = plateau_json(curves.weighted, diag);
  }
  if (diag["ks"].get<bool>()) {
    const double alpha = diag["ks_alpha"].get<double>();
    const auto kf = ks_series(fwd, alpha), kr = ks_series(rev, alpha);
    write_series(run, "ks_forward.csv", kf);
    write_series(run, "ks_reverse.csv", kr);
    summary["plateau_ks_forward"] = plateau_json(kf, diag);
    summary["plateau_ks_reverse"] = plateau_json(kr, diag);
  }
  write_json(run, "summary.json", summary);
  return kOk;
}

int cmd_kid(const Experiment& e, RunDir& run) {
  const std::string gen_path = e.raw["kid"]["generated"].get<std::string>();
  if (gen_path.empty()) throw ConfigError({"/kid/generated is required for the kid subcommand"});
  const std::string real_path = e.raw["kid"]["real"].get<std::string>();
  const Matrix real = real_path.empty() ? build_data(e).holdout : io::load_samples(real_path);
  const Matrix gen = io::load_samples(gen_path);
  const FeatureSpec feature = feature_spec(e);
  const KidReport r = kid(feature_map(real, feature), feature_map(gen, feature), kid_options(e), feature.id());
  {
    std::ofstream out(run.file("kid.csv"));
    out << "mmd2,stderr\n" << format_real(r.mmd2) << ',' << format_real(r.stderr) << '\n';
  }
  run.add("kid.csv");
  write_json(run, "kid.json", r.to_json());
  return kOk;
}

int cmd_uturn(const Experiment& e, RunDir& run) {
  const Schedule schedule(e.schedule);
  const Data data = build_data(e);
  auto score = build_score(e, data, schedule, run);
  UTurnOptions options;
  options.feature = feature_spec(e);
  options.kid = kid_options(e);
  options.integrator = e.integrator;
  const UTurnScan scan = uturn_scan(data.train, schedule, *score, e.raw["uturn"]["turn_steps"].get<std::vector<int>>(),
                                    e.raw["uturn"]["M"].get<Eigen::Index>(), e.seed("uturn"), data.holdout, options);
  {
    std::ofstream out(run.file("uturn_scan.csv"));
    scan.write_csv(out);
  }
  run.add("uturn_scan.csv");
  std::vector<double> one_minus_phi;
  for (int n : scan.turn_steps) one_minus_phi.push_back(schedule.lambda(n));
  write_columns(run, "uturn_pairing.csv", "n_u,rank_correlation,one_minus_phi", {scan.pairing, one_minus_phi},
                scan.turn_steps);
  write_json(run, "summary.json", scan.summary());
  std::cout << "optimal turn step: " << (scan.optimal_step ? std::to_string(*scan.optimal_step) : "none") << '\n';
  return kOk;
}

int cmd_report(const Options& opt) {
  std::vector<fs::path> dirs;
  if (!opt.runs.empty()) {
    for (const auto& r : opt.runs) dirs.emplace_back(r);
  } else if (fs::is_directory(opt.out)) {
    for (const auto& entry : fs::directory_iterator(opt.out))
      if (fs::exists(entry.path() / "manifest.json") && entry.path().filename().string().rfind("report-", 0) != 0)
        dirs.push_back(entry.path());
  }
  std::sort(dirs.begin(), dirs.end());
  if (dirs.empty()) throw ConfigError({"report found no run directories"});
  RunDir run(opt.out, "report", json::object());
  json runs = json::array();
  bool intact = true;
  std::vector<std::string> rows;
  for (const auto& dir : dirs) {
    std::ifstream in(dir / "manifest.json");
    if (!in) throw LoadError("no manifest in " + dir.string());
    const json m = json::parse(in);
    json entry{{"run", dir.filename().string()}, {"subcommand", m.value("subcommand", "")}, {"status", m.value("status", "")}};
    json mismatched = json::array();
    const json files = m.value("files", json::object());
    std::string listing;
    for (const auto& [name, digest] : files.items()) {
      const fs::path f = dir / name;
      if (!fs::exists(f) || sha256_file(f) != digest.get<std::string>()) mismatched.push_back(name);
      listing += name + ' ' + digest.get<std::string>() + '\n';
    }
    entry["content_sha256"] = sha256_text(listing);
    entry["mismatched"] = mismatched;
    if (fs::exists(dir / "summary.json")) entry["summary"] = json::parse(std::ifstream(dir / "summary.json"));
    const bool ok = mismatched.empty();
    intact = intact && ok;
    rows.push_back(entry["subcommand"].get<std::string>() + ',' + entry["content_sha256"].get<std::string>() + ',' +
                   entry["status"].get<std::string>() + ',' + std::to_string(files.size()) + ',' + (ok ? "yes" : "no"));
    std::cout << dir.filename().string() << "  " << entry["status"].get<std::string>() << "  "
              << (ok ? "hashes ok" : "HASH MISMATCH") << '\n';
    runs.push_back(entry);
  }
  std::sort(rows.begin(), rows.end());
  {
    std::ofstream csv(run.file("report.csv"));
    csv << "subcommand,content_sha256,status,files,verified\n";
    for (const auto& r : rows) csv << r << '\n';
  }
  run.add("report.csv");
  write_json(run, "report.json", {{"runs", runs}, {"intact", intact}});
  run.finish();
  return intact ? kOk : kFailure;
}

int dispatch(const std::string& name, const Options& opt) {
  if (name == "selftest") return run_selftest(std::cout) ? kOk : kSelftest;
  if (name == "report") return cmd_report(opt);

  const json raw = load_config(opt.config, opt.overrides);
  const Experiment e = validate_config(raw);
  RunDir run(opt.out, name, raw);
  run.set("threads", max_threads());
  try {
    int code = kOk;
    if (name == "forward") code = cmd_forward(e, run);
    else if (name == "train-score") code = cmd_train(e, run);
    else if (name == "reverse") code = cmd_reverse(e, run);
    else if (name == "diagnose") code = cmd_diagnose(e, run);
    else if (name == "kid") code = cmd_kid(e, run);
    else if (name == "uturn-scan") code = cmd_uturn(e, run);
    if (opt.plots) {
      std::vector<fs::path> csvs;
      for (const auto& entry : fs::directory_iterator(run.path()))
        if (entry.path().extension() == ".csv" && entry.path().filename() != "samples.csv") csvs.push_back(entry.path());
      std::sort(csvs.begin(), csvs.end());
      for (const auto& c : csvs) {
        fs::path svg = c;
        svg.replace_extension(".svg");
        write_svg_plot(c, svg);
        run.add(svg.filename().string());
      }
    }
    run.finish();
    std::cout << run.path().string() << '\n';
    return code;
  } catch (const std::exception& ex) {
    run.fail(ex.what());
    throw;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Variance-preserving diffusion toolkit: simulation, score learning, diagnostics and U-turn scans"};
  app.require_subcommand(1);
  Options opt;
  const std::vector<std::pair<std::string, std::string>> commands{
      {"forward", "simulate the forward process on the dataset and compare moments with closed forms"},
      {"train-score", "fit the MLP score model by denoising score matching"},
      {"reverse", "generate samples with the reverse process from noise"},
      {"diagnose", "reverse autocorrelation, half-decay, score norms and KS ratios"},
      {"kid", "KID between two sample files"},
      {"uturn-scan", "scan U-turn steps against noise-started reverse runs"},
      {"report", "aggregate run directories and verify artifact hashes"},
      {"selftest", "run the closed-form oracle suite"}};
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    if (name == "selftest") continue;
    sub->add_option("--out", opt.out, "output directory")->capture_default_str();
    if (name == "report") {
      sub->add_option("runs", opt.runs, "run directories (default: every run under --out)");
      continue;
    }
    sub->add_option("--config", opt.config, "JSON config file")->check(CLI::ExistingFile);
    sub->add_option("--set", opt.overrides, "override key=value (dotted key path)")->take_all();
    sub->add_option("--threads", opt.threads, "worker thread cap (0 = hardware)")->check(CLI::NonNegativeNumber);
    sub->add_flag("--plots", opt.plots, "also write SVG plots of every CSV");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }
  set_max_threads(static_cast<unsigned>(opt.threads));
  const std::string name = app.get_subcommands().front()->get_name();
  try {
    return dispatch(name, opt);
  } catch (const ConfigError& e) {
    std::cerr << e.what() << '\n';
    return kConfig;
  } catch (const ArgumentError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure at step " << e.step() << ": " << e.what() << '\n';
    return kNumerical;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
}
