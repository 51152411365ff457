#include <gtest/gtest.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sys/wait.h>

#include "config.hpp"
#include "plot.hpp"
#include "run_dir.hpp"

using namespace utd;
using namespace utd::cli;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code = -1;
  std::string out;
};

Result run(const std::string& args) {
  const std::string cmd = std::string(UTD_CLI_PATH) + " " + args + " 2>/dev/null";
  Result r;
  FILE* p = popen(cmd.c_str(), "r");
  std::array<char, 512> buf{};
  while (fgets(buf.data(), buf.size(), p)) r.out += buf.data();
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("utd_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

json seeded() {
  json c = default_config();
  c["seeds"] = {{"data", 1}, {"forward", 2}, {"reverse", 3}, {"train", 4}, {"kid", 5}, {"uturn", 6}};
  return c;
}

std::string last_line(const std::string& s) {
  std::string t = s;
  while (!t.empty() && t.back() == '\n') t.pop_back();
  return t.substr(t.rfind('\n') == std::string::npos ? 0 : t.rfind('\n') + 1);
}

const std::string kConfig = std::string(UTD_SOURCE_DIR) + "/configs/gm_oracle.json";
const std::string kSmall =
    " --set dataset.samples=300 dataset.holdout=100 simulation.M=200 simulation.grid_points=5 uturn.M=200";

}  // namespace

TEST(Config, DefaultsNeedSeeds) {
  try {
    validate_config(default_config());
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_FALSE(e.problems().empty());
  }
  EXPECT_NO_THROW(validate_config(seeded()));
}

TEST(Config, ListsEveryProblem) {
  json c = seeded();
  c["schedule"]["kind"] = "quadratic";
  c["simulation"]["M"] = 0;
  c["seeds"]["kid"] = -1;
  try {
    validate_config(c);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_GE(e.problems().size(), 3u);
  }
}

TEST(Config, AnalyticScoreNeedsMixture) {
  json c = seeded();
  c["dataset"]["kind"] = "builtin";
  EXPECT_THROW(validate_config(c), ConfigError);
}

TEST(Config, Overrides) {
  json c = default_config();
  apply_override(c, "schedule.N=50");
  apply_override(c, "schedule.kind=cosine");
  apply_override(c, "uturn.turn_steps=[5,10]");
  EXPECT_EQ(c["schedule"]["N"], 50);
  EXPECT_EQ(c["schedule"]["kind"], "cosine");
  EXPECT_EQ(c["uturn"]["turn_steps"], json::array({5, 10}));
  EXPECT_THROW(apply_override(c, "novalue"), ConfigError);
  EXPECT_THROW(apply_override(c, "a..b=1"), ConfigError);
}

TEST(Config, FileMergesOverDefaults) {
  const json c = load_config(kConfig, {"simulation.M=7"});
  EXPECT_EQ(c["simulation"]["M"], 7);
  EXPECT_EQ(c["simulation"]["integrator"], "euler_maruyama");
  EXPECT_EQ(c["seeds"]["uturn"], 6);
  EXPECT_THROW(load_config("/nonexistent.json", {}), ConfigError);
}

TEST(RunDirTest, ManifestLifecycle) {
  const fs::path out = scratch("rundir");
  RunDir run(out, "forward", seeded());
  auto manifest = [&] { return json::parse(std::ifstream(run.file("manifest.json"))); };
  EXPECT_EQ(manifest()["status"], "incomplete");
  std::ofstream(run.file("a.csv")) << "abc";
  run.add("a.csv");
  run.finish();
  const json m = manifest();
  EXPECT_EQ(m["status"], "complete");
  EXPECT_EQ(m["files"]["a.csv"], "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  EXPECT_EQ(m["seeds"]["kid"], 5);
  EXPECT_EQ(sha256_text("abc"), m["files"]["a.csv"]);
  RunDir second(out, "forward", seeded());
  EXPECT_NE(second.path(), run.path());
}

TEST(Plot, WritesPolylines) {
  const fs::path dir = scratch("plot");
  {
    std::ofstream f(dir / "s.csv");
    f << "n,value,stderr\n0,1,0\n1,0.5,0\n2,0.25,0\n";
  }
  const CsvTable t = read_table(dir / "s.csv");
  ASSERT_EQ(t.header.size(), 3u);
  EXPECT_EQ(t.columns[1].size(), 3u);
  write_svg_plot(dir / "s.csv", dir / "s.svg");
  std::ifstream in(dir / "s.svg");
  const std::string svg((std::istreambuf_iterator<char>(in)), {});
  EXPECT_NE(svg.find("<svg"), std::string::npos);
  EXPECT_NE(svg.find("polyline"), std::string::npos);
}

TEST(Cli, Selftest) { EXPECT_EQ(run("selftest").code, 0); }

TEST(Cli, BadConfigExitsTwo) {
  const fs::path out = scratch("bad");
  EXPECT_EQ(run("forward --out " + out.string()).code, 2);
  EXPECT_EQ(run("forward --config " + kConfig + " --set schedule.kind=bogus --out " + out.string()).code, 2);
  EXPECT_EQ(run("nosuchcommand").code, 2);
}

TEST(Cli, ForwardRunAndReport) {
  const fs::path out = scratch("forward");
  const Result r = run("forward --config " + kConfig + kSmall + " --out " + out.string());
  ASSERT_EQ(r.code, 0);
  const fs::path dir = last_line(r.out);
  const json m = json::parse(std::ifstream(dir / "manifest.json"));
  EXPECT_EQ(m["status"], "complete");
  for (const char* f : {"mean_std.csv", "forward_moments.csv", "autocorr_from_zero.csv", "autocorr_from_T.csv"}) {
    ASSERT_TRUE(m["files"].contains(f)) << f;
    EXPECT_EQ(m["files"][f], sha256_file(dir / f));
  }
  EXPECT_EQ(run("report --out " + out.string()).code, 0);
  std::ofstream(dir / "mean_std.csv", std::ios::app) << "tampered\n";
  EXPECT_EQ(run("report --out " + out.string()).code, 1);
}

TEST(Cli, RerunIsByteIdentical) {
  const fs::path out = scratch("rerun");
  const Result a = run("reverse --config " + kConfig + kSmall + " --threads 1 --out " + out.string());
  const Result b = run("reverse --config " + kConfig + kSmall + " --threads 3 --out " + out.string());
  ASSERT_EQ(a.code, 0);
  ASSERT_EQ(b.code, 0);
  const json ma = json::parse(std::ifstream(fs::path(last_line(a.out)) / "manifest.json"));
  const json mb = json::parse(std::ifstream(fs::path(last_line(b.out)) / "manifest.json"));
  EXPECT_EQ(ma["files"]["samples.csv"], mb["files"]["samples.csv"]);
}
