#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "support.hpp"

namespace fs = std::filesystem;
using specfair::testing::drop_column;
using specfair::testing::first_line;
using specfair::testing::slurp;
using specfair::testing::svg_skeleton;

namespace {

const fs::path kCli = SPECFAIR_CLI_PATH;
const fs::path kConfigs = SPECFAIR_CONFIG_DIR;
const fs::path kFixtures = SPECFAIR_FIXTURE_DIR;

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("specfair_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

struct Outcome {
  int code = -1;
  std::string output;
};

Outcome run(const std::string& args, const std::string& env = "") {
  const fs::path log = fs::temp_directory_path() / "specfair_cli_last.log";
  const std::string cmd = env + " " + kCli.string() + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  Outcome o;
  o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  o.output = slurp(log);
  return o;
}

std::string config(const std::string& name) { return (kConfigs / name).string(); }

fs::path write_config(const fs::path& dir, const nlohmann::json& patch) {
  auto j = nlohmann::json::parse(slurp(kConfigs / "default.json"));
  j.merge_patch(patch);
  const fs::path path = dir / "config.json";
  std::ofstream(path) << j.dump(2);
  return path;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& path) {
  std::vector<std::vector<std::string>> rows;
  std::ifstream in(path);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

std::map<std::string, std::string> fixture_headers() {
  std::map<std::string, std::string> out;
  std::ifstream in(kFixtures / "csv_headers.txt");
  std::string line;
  while (std::getline(in, line)) {
    const auto bar = line.find('|');
    if (bar != std::string::npos) out[line.substr(0, bar)] = line.substr(bar + 1);
  }
  return out;
}

}  // namespace

TEST(Cli, VersionAndUsage) {
  const auto v = run("--version");
  EXPECT_EQ(v.code, 0);
  EXPECT_NE(v.output.find("0.3.0"), std::string::npos);
  EXPECT_EQ(run("").code, 2);
  EXPECT_EQ(run("metrics").code, 2);
  EXPECT_EQ(run("bogus --config x").code, 2);
}

TEST(Cli, MetricsMatchGolden) {
  const auto dir = scratch("golden");
  const auto o = run("metrics --config " + config("default.json") + " --out " + dir.string());
  ASSERT_EQ(o.code, 0) << o.output;
  EXPECT_NE(o.output.find("U = "), std::string::npos);
  const auto got = read_csv(dir / "metrics.csv");
  const auto want = read_csv(kFixtures / "default_metrics.csv");
  ASSERT_EQ(got.size(), want.size());
  EXPECT_EQ(got[0], want[0]);
  for (std::size_t r = 1; r < got.size(); ++r) {
    ASSERT_EQ(got[r].size(), want[r].size());
    EXPECT_EQ(got[r][0], want[r][0]);
    for (std::size_t c = 1; c < got[r].size(); ++c) {
      if (got[r][c].empty() || want[r][c].empty()) {
        EXPECT_EQ(got[r][c], want[r][c]);
        continue;
      }
      EXPECT_NEAR(std::stod(got[r][c]), std::stod(want[r][c]), 1e-12)
          << "row " << r << " column " << want[0][c];
    }
  }
}

TEST(Cli, ArtifactHeadersAndSvgStructure) {
  const auto dir = scratch("headers");
  const auto cfg = write_config(dir, {{"trainer", {{"steps", 30}}}});
  const std::string common = " --config " + cfg.string() + " --out " + dir.string();
  ASSERT_EQ(run("simulate --steps 20" + common).code, 0);
  ASSERT_EQ(run("metrics" + common).code, 0);
  ASSERT_EQ(run("train-scdf" + common).code, 0);
  ASSERT_EQ(run("sweep-temperature --temps 0.5,1,2" + common).code, 0);
  ASSERT_EQ(run("balance-data --grid 0,0.5" + common + " --seed 3").code, 0);
  ASSERT_EQ(run("estimate-representation --k 40" + common).code, 0);
  ASSERT_EQ(run("verify-theorems --trials 3" + common).code, 0);
  const auto headers = fixture_headers();
  ASSERT_GE(headers.size(), 12u);
  for (const auto& [file, header] : headers) {
    EXPECT_EQ(first_line(dir / file), header) << file;
  }
  const auto report = run("report --run " + dir.string());
  ASSERT_EQ(report.code, 0) << report.output;
  for (const char* svg : {"alpha_by_task.svg", "alpha_vs_fitness.svg", "unfairness_over_steps.svg"}) {
    EXPECT_EQ(svg_skeleton(slurp(dir / svg)), slurp(kFixtures / (std::string(svg) + ".skel"))) << svg;
  }
  const auto manifest = nlohmann::json::parse(slurp(dir / "manifest.json"));
  EXPECT_EQ(manifest["tool_version"], "0.3.0");
  EXPECT_EQ(manifest["config_hash"].get<std::string>().size(), 16u);
}

TEST(Cli, TrainingIsReproducible) {
  const auto a = scratch("repro_a");
  const auto b = scratch("repro_b");
  const auto cfg = write_config(a, {{"trainer", {{"steps", 40}}}});
  ASSERT_EQ(run("train-scdf --config " + cfg.string() + " --out " + a.string()).code, 0);
  ASSERT_EQ(run("train-scdf --config " + cfg.string() + " --out " + b.string()).code, 0);
  for (const char* f : {"metrics_before.csv", "metrics_after.csv", "u_history.csv", "drafter_final.json"}) {
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  }
  EXPECT_EQ(drop_column(slurp(a / "train_log.csv"), 0), drop_column(slurp(b / "train_log.csv"), 0));
  const auto c = scratch("repro_c");
  ASSERT_EQ(run("train-scdf --config " + cfg.string() + " --out " + c.string() + " --seed 5").code, 0);
  EXPECT_NE(slurp(a / "drafter_final.json"), slurp(c / "drafter_final.json"));
}

TEST(Cli, SeedPrecedence) {
  const auto a = scratch("seed_env");
  const auto b = scratch("seed_flag");
  const auto c = scratch("seed_both");
  const std::string cfg = " --config " + config("default.json");
  ASSERT_EQ(run("simulate --steps 30" + cfg + " --out " + a.string(), "SPECFAIR_SEED=77").code, 0);
  ASSERT_EQ(run("simulate --steps 30 --seed 77" + cfg + " --out " + b.string()).code, 0);
  ASSERT_EQ(run("simulate --steps 30 --seed 77" + cfg + " --out " + c.string(), "SPECFAIR_SEED=5").code, 0);
  EXPECT_EQ(slurp(a / "simulate.csv"), slurp(b / "simulate.csv"));
  EXPECT_EQ(slurp(b / "simulate.csv"), slurp(c / "simulate.csv"));
  EXPECT_EQ(run("metrics" + cfg + " --out " + a.string(), "SPECFAIR_SEED=abc").code, 2);
}

TEST(Cli, IdenticalTasksHaveZeroUnfairness) {
  const auto dir = scratch("identical");
  const auto cfg = write_config(dir, {{"family", {{"identical_tasks", true}}}});
  const auto o = run("metrics --config " + cfg.string() + " --out " + dir.string());
  ASSERT_EQ(o.code, 0) << o.output;
  const auto rows = read_csv(dir / "family_summary.csv");
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(std::stod(rows[1][1]), 0.0);
}

TEST(Cli, VerifyTheoremsPassesOnDefault) {
  const auto dir = scratch("verify");
  const auto o = run("verify-theorems --trials 20 --config " + config("default.json") + " --out " + dir.string());
  EXPECT_EQ(o.code, 0) << o.output;
  const auto rows = read_csv(dir / "verify_summary.csv");
  ASSERT_GT(rows.size(), 1u);
  for (std::size_t r = 1; r < rows.size(); ++r) EXPECT_EQ(rows[r][2], "0") << rows[r][0];
}

TEST(Cli, ExitCodes) {
  const auto dir = scratch("exit");
  std::ofstream(dir / "broken.json") << "{\"seed\": 1,\n  \"vocab_size\": }";
  const auto syntax = run("metrics --config " + (dir / "broken.json").string());
  EXPECT_EQ(syntax.code, 2);
  EXPECT_NE(syntax.output.find("line 2"), std::string::npos) << syntax.output;

  const auto unknown = write_config(dir, {{"spec", {{"gama", 3}}}});
  const auto u = run("metrics --config " + unknown.string() + " --out " + dir.string());
  EXPECT_EQ(u.code, 2);
  EXPECT_NE(u.output.find("/spec/gama"), std::string::npos) << u.output;

  const auto bad_gamma = write_config(dir, {{"spec", {{"gamma", 0}}}});
  EXPECT_EQ(run("metrics --config " + bad_gamma.string() + " --out " + dir.string()).code, 2);

  EXPECT_EQ(run("metrics --config " + (dir / "nope.json").string()).code, 3);
  EXPECT_EQ(run("report --run " + (dir / "no_run").string()).code, 3);
  EXPECT_EQ(run("sweep-temperature --temps -1 --config " + config("default.json") + " --out " + dir.string()).code, 2);
}
