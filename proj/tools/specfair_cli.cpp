// specfair command-line driver. Talks to the library through the C API only.

#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "specfair/specfair.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitViolation = 1;
constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitOther = 4;

int exit_code(specfair_status status) {
  switch (status) {
    case SPECFAIR_OK: return kExitOk;
    case SPECFAIR_E_THEOREM_VIOLATION: return kExitViolation;
    case SPECFAIR_E_CONFIG:
    case SPECFAIR_E_INFEASIBLE_SPEC:
    case SPECFAIR_E_INVALID_TEMPERATURE:
    case SPECFAIR_E_INVALID_ARGUMENT: return kExitConfig;
    case SPECFAIR_E_IO: return kExitIo;
    default: return kExitOther;
  }
}

int report(specfair_status status) {
  if (status != SPECFAIR_OK) {
    std::fprintf(stderr, "specfair: %s: %s\n", specfair_status_string(status), specfair_last_error());
  }
  return exit_code(status);
}

struct ConfigHandle {
  specfair_config* cfg = nullptr;
  ~ConfigHandle() { specfair_config_free(cfg); }
};

struct Common {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;

  void attach(CLI::App* sub) {
    sub->add_option("--config", config, "Experiment config (JSON)")->required();
    sub->add_option("--out", out, "Output directory (overrides outputs.directory)");
    sub->add_option("--seed", seed, "Master seed (overrides SPECFAIR_SEED and the config)");
  }

  specfair_status load(ConfigHandle& h) const {
    specfair_status s = specfair_config_load(config.c_str(), &h.cfg);
    if (s != SPECFAIR_OK) return s;
    s = specfair_config_resolve_seed(h.cfg, seed.has_value() ? 1 : 0, seed.value_or(0));
    if (s != SPECFAIR_OK) return s;
    if (!out.empty()) s = specfair_config_set_output_dir(h.cfg, out.c_str());
    return s;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Speculative decoding fairness lab"};
  app.set_version_flag("--version", std::string(specfair_version()));
  app.require_subcommand(1);

  Common simulate_opts;
  std::size_t simulate_steps = 1000;
  bool trace = false;
  auto* simulate = app.add_subcommand("simulate", "Run speculative decoding and record acceptance");
  simulate_opts.attach(simulate);
  simulate->add_option("--steps", simulate_steps, "Speculative steps per task")->check(CLI::PositiveNumber);
  simulate->add_flag("--trace", trace, "Write per-step traces to traces.jsonl");

  Common metrics_opts;
  auto* metrics = app.add_subcommand("metrics", "Per-task fairness snapshot and U");
  metrics_opts.attach(metrics);

  Common verify_opts;
  std::size_t trials = 100;
  auto* verify = app.add_subcommand("verify-theorems", "Check the bounds on random families");
  verify_opts.attach(verify);
  verify->add_option("--trials", trials, "Number of random families")->check(CLI::PositiveNumber);

  Common train_opts;
  std::optional<std::size_t> train_steps;
  auto* train = app.add_subcommand("train-scdf", "Fairness-weighted drafter fine-tuning");
  train_opts.attach(train);
  train->add_option("--steps", train_steps, "Override trainer.steps")->check(CLI::PositiveNumber);

  Common sweep_opts;
  std::vector<double> temps;
  std::string quality;
  auto* sweep = app.add_subcommand("sweep-temperature", "Joint temperature sweep");
  sweep_opts.attach(sweep);
  sweep->add_option("--temps", temps, "Comma-separated temperatures")->delimiter(',')->required();
  sweep->add_option("--quality", quality, "CSV with columns task,quality");

  Common balance_opts;
  std::vector<double> grid;
  auto* balance = app.add_subcommand("balance-data", "Data-balanced fine-tuning on the first two tasks");
  balance_opts.attach(balance);
  balance->add_option("--grid", grid, "Comma-separated mix proportions")->delimiter(',')->required();

  Common repr_opts;
  std::optional<std::size_t> k;
  auto* repr = app.add_subcommand("estimate-representation", "Rank tasks by drafter prior mass");
  repr_opts.attach(repr);
  repr->add_option("--k", k, "Number of generations")->check(CLI::PositiveNumber);

  std::string run_dir;
  auto* rep = app.add_subcommand("report", "Render SVG plots from a run directory");
  rep->add_option("--run", run_dir, "Run directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  if (rep->parsed()) return report(specfair_run_report(run_dir.c_str()));

  ConfigHandle h;
  specfair_status s = SPECFAIR_OK;
  if (simulate->parsed()) {
    if ((s = simulate_opts.load(h)) == SPECFAIR_OK) s = specfair_run_simulate(h.cfg, simulate_steps, trace);
  } else if (metrics->parsed()) {
    if ((s = metrics_opts.load(h)) == SPECFAIR_OK) s = specfair_run_metrics(h.cfg, nullptr);
  } else if (verify->parsed()) {
    if ((s = verify_opts.load(h)) == SPECFAIR_OK) s = specfair_run_verify_theorems(h.cfg, trials);
  } else if (train->parsed()) {
    if ((s = train_opts.load(h)) == SPECFAIR_OK && train_steps) {
      s = specfair_config_set_train_steps(h.cfg, *train_steps);
    }
    if (s == SPECFAIR_OK) s = specfair_run_train_scdf(h.cfg);
  } else if (sweep->parsed()) {
    if ((s = sweep_opts.load(h)) == SPECFAIR_OK) {
      s = specfair_run_sweep_temperature(h.cfg, temps.data(), temps.size(),
                                         quality.empty() ? nullptr : quality.c_str());
    }
  } else if (balance->parsed()) {
    if ((s = balance_opts.load(h)) == SPECFAIR_OK) s = specfair_run_balance_data(h.cfg, grid.data(), grid.size());
  } else if (repr->parsed()) {
    if ((s = repr_opts.load(h)) == SPECFAIR_OK && k) s = specfair_config_set_representation_k(h.cfg, *k);
    if (s == SPECFAIR_OK) s = specfair_run_estimate_representation(h.cfg);
  }
  return report(s);
}
