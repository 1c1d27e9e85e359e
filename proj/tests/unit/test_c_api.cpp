#include <gtest/gtest.h>

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "specfair/specfair.h"

namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("specfair_capi_" + name);
  fs::remove_all(dir);
  return dir;
}

const char* kSmallConfig = R"({
  "seed": 11,
  "vocab_size": 8,
  "family": {"tasks": [{"id": "x", "r_q": 0.1, "r_p": 0.02},
                       {"id": "y", "r_q": 0.3, "r_p": 0.02}]},
  "trainer": {"steps": 20}
})";

struct Config {
  specfair_config* cfg = nullptr;
  ~Config() { specfair_config_free(cfg); }
};

}  // namespace

TEST(CApi, VersionAndStatusStrings) {
  EXPECT_STREQ(specfair_version(), "0.3.0");
  EXPECT_STREQ(specfair_status_string(SPECFAIR_OK), "ok");
  EXPECT_STREQ(specfair_status_string(SPECFAIR_E_IO), "i/o error");
  EXPECT_STREQ(specfair_status_string(static_cast<specfair_status>(99)), "unknown status");
}

TEST(CApi, DistributionArithmetic) {
  const double p[] = {0.8, 0.2};
  const double q[] = {0.5, 0.5};
  double out = 0.0;
  ASSERT_EQ(specfair_acceptance_overlap(p, q, 2, &out), SPECFAIR_OK);
  EXPECT_NEAR(out, 0.7, 1e-15);
  ASSERT_EQ(specfair_total_variation(p, q, 2, &out), SPECFAIR_OK);
  EXPECT_NEAR(out, 0.3, 1e-15);
  ASSERT_EQ(specfair_kl_divergence(p, q, 2, 1e-12, &out), SPECFAIR_OK);
  EXPECT_NEAR(out, 0.192744757021757429884, 1e-15);
  ASSERT_EQ(specfair_cross_entropy(q, q, 2, 1e-12, &out), SPECFAIR_OK);
  EXPECT_NEAR(out, 0.693147180559945309417, 1e-15);
  double r[2] = {-1.0, -1.0};
  ASSERT_EQ(specfair_residual(p, q, 2, r), SPECFAIR_OK);
  EXPECT_EQ(r[0], 1.0);
  EXPECT_EQ(r[1], 0.0);
  ASSERT_EQ(specfair_speedup(0.5, 2, 0.0, &out), SPECFAIR_OK);
  EXPECT_NEAR(out, 1.75, 1e-15);
  const double d[] = {1.0, 2.0, 3.0};
  ASSERT_EQ(specfair_unfairness(d, 3, &out), SPECFAIR_OK);
  EXPECT_NEAR(out, 5.0 / 3.0, 1e-15);
}

TEST(CApi, ErrorsCarryCodesAndMessages) {
  const double bad[] = {0.7, 0.7};
  const double q[] = {0.5, 0.5};
  double out = 0.0;
  EXPECT_EQ(specfair_total_variation(bad, q, 2, &out), SPECFAIR_E_INVALID_DISTRIBUTION);
  EXPECT_GT(std::strlen(specfair_last_error()), 0u);
  EXPECT_EQ(specfair_residual(q, q, 2, &out), SPECFAIR_E_DEGENERATE_RESIDUAL);
  EXPECT_EQ(specfair_speedup(0.5, 0, 0.1, &out), SPECFAIR_E_INVALID_ARGUMENT);
  EXPECT_EQ(specfair_total_variation(nullptr, q, 2, &out), SPECFAIR_E_INVALID_ARGUMENT);
  EXPECT_NE(std::string(specfair_last_error()).find("p is null"), std::string::npos);
  EXPECT_EQ(specfair_unfairness(q, 0, &out), SPECFAIR_E_DOMAIN);
}

TEST(CApi, ConfigLifecycle) {
  Config c;
  ASSERT_EQ(specfair_config_parse(kSmallConfig, &c.cfg), SPECFAIR_OK) << specfair_last_error();
  std::uint64_t seed = 0;
  ASSERT_EQ(specfair_config_resolve_seed(c.cfg, 1, 99), SPECFAIR_OK);
  ASSERT_EQ(specfair_config_seed(c.cfg, &seed), SPECFAIR_OK);
  EXPECT_EQ(seed, 99u);
  char small[8];
  EXPECT_EQ(specfair_config_hash(c.cfg, small, sizeof small), SPECFAIR_E_INVALID_ARGUMENT);
  char hash[17];
  ASSERT_EQ(specfair_config_hash(c.cfg, hash, sizeof hash), SPECFAIR_OK);
  EXPECT_EQ(std::strlen(hash), 16u);
  EXPECT_EQ(specfair_config_set_train_steps(c.cfg, 0), SPECFAIR_E_INVALID_ARGUMENT);
  EXPECT_EQ(specfair_config_set_output_dir(c.cfg, ""), SPECFAIR_E_INVALID_ARGUMENT);

  specfair_config* bad = nullptr;
  EXPECT_EQ(specfair_config_parse("{\"seed\": 1,", &bad), SPECFAIR_E_CONFIG);
  EXPECT_EQ(bad, nullptr);
  EXPECT_EQ(specfair_config_load("/nonexistent/specfair.json", &bad), SPECFAIR_E_IO);
  specfair_config_free(nullptr);
}

TEST(CApi, MetricsRunAndModelRoundTrip) {
  Config c;
  ASSERT_EQ(specfair_config_parse(kSmallConfig, &c.cfg), SPECFAIR_OK);
  const auto dir = scratch("metrics");
  ASSERT_EQ(specfair_config_set_output_dir(c.cfg, dir.c_str()), SPECFAIR_OK);
  double u = -1.0;
  ASSERT_EQ(specfair_run_metrics(c.cfg, &u), SPECFAIR_OK) << specfair_last_error();
  EXPECT_GT(u, 0.0);
  EXPECT_TRUE(fs::exists(dir / "metrics.csv"));
  EXPECT_TRUE(fs::exists(dir / "manifest.json"));

  ASSERT_EQ(specfair_run_train_scdf(c.cfg), SPECFAIR_OK) << specfair_last_error();
  specfair_model* m = nullptr;
  ASSERT_EQ(specfair_model_load((dir / "drafter_final.json").c_str(), &m), SPECFAIR_OK)
      << specfair_last_error();
  std::size_t vocab = 0;
  ASSERT_EQ(specfair_model_vocab_size(m, &vocab), SPECFAIR_OK);
  EXPECT_EQ(vocab, 8u);
  std::vector<double> dist(vocab);
  const std::int32_t ctx[] = {3};
  ASSERT_EQ(specfair_model_predict(m, ctx, 1, dist.data(), dist.size()), SPECFAIR_OK);
  double s = 0.0;
  for (double x : dist) s += x;
  EXPECT_NEAR(s, 1.0, 1e-12);
  EXPECT_EQ(specfair_model_predict(m, ctx, 1, dist.data(), 2), SPECFAIR_E_INVALID_ARGUMENT);
  const auto copy = dir / "copy.json";
  ASSERT_EQ(specfair_model_save(m, copy.c_str()), SPECFAIR_OK);
  specfair_model* m2 = nullptr;
  ASSERT_EQ(specfair_model_load(copy.c_str(), &m2), SPECFAIR_OK);
  std::vector<double> dist2(vocab);
  ASSERT_EQ(specfair_model_predict(m2, ctx, 1, dist2.data(), dist2.size()), SPECFAIR_OK);
  EXPECT_EQ(dist, dist2);
  specfair_model_free(m);
  specfair_model_free(m2);

  ASSERT_EQ(specfair_run_report(dir.c_str()), SPECFAIR_OK) << specfair_last_error();
  EXPECT_TRUE(fs::exists(dir / "alpha_by_task.svg"));
  EXPECT_EQ(specfair_run_report((dir / "missing").c_str()), SPECFAIR_E_IO);
  fs::remove_all(dir);
}

TEST(CApi, OtherRunsProduceTheirArtifacts) {
  Config c;
  ASSERT_EQ(specfair_config_parse(kSmallConfig, &c.cfg), SPECFAIR_OK);
  const auto dir = scratch("runs");
  ASSERT_EQ(specfair_config_set_output_dir(c.cfg, dir.c_str()), SPECFAIR_OK);
  ASSERT_EQ(specfair_run_simulate(c.cfg, 50, 1), SPECFAIR_OK) << specfair_last_error();
  EXPECT_TRUE(fs::exists(dir / "simulate.csv"));
  EXPECT_TRUE(fs::exists(dir / "traces.jsonl"));
  const double temps[] = {0.5, 1.0, 2.0};
  ASSERT_EQ(specfair_run_sweep_temperature(c.cfg, temps, 3, nullptr), SPECFAIR_OK);
  EXPECT_TRUE(fs::exists(dir / "temperature_sweep.csv"));
  const double bad_temp[] = {-1.0};
  EXPECT_EQ(specfair_run_sweep_temperature(c.cfg, bad_temp, 1, nullptr), SPECFAIR_E_INVALID_TEMPERATURE);
  const double grid[] = {0.0, 0.5};
  ASSERT_EQ(specfair_run_balance_data(c.cfg, grid, 2), SPECFAIR_OK) << specfair_last_error();
  EXPECT_TRUE(fs::exists(dir / "balance.csv"));
  ASSERT_EQ(specfair_config_set_representation_k(c.cfg, 50), SPECFAIR_OK);
  ASSERT_EQ(specfair_run_estimate_representation(c.cfg), SPECFAIR_OK) << specfair_last_error();
  EXPECT_TRUE(fs::exists(dir / "representation.csv"));
  ASSERT_EQ(specfair_run_verify_theorems(c.cfg, 5), SPECFAIR_OK) << specfair_last_error();
  EXPECT_TRUE(fs::exists(dir / "verify_summary.csv"));
  fs::remove_all(dir);
}
