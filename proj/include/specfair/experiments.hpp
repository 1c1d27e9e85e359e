#pragma once

// Subcommand runners. Each one writes its artifacts plus manifest.json into
// the configured output directory and prints a short summary to `log`.

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "specfair/config.hpp"
#include "specfair/synthetic_family.hpp"

namespace specfair {

inline constexpr const char* kToolVersion = "0.3.0";

inline constexpr const char* kUHistoryHeader = "step,unfairness";
inline constexpr const char* kFamilySummaryHeader = "tasks,unfairness,d_min,star_task,alpha_variance";
inline constexpr const char* kRepresentationHeader = "rank,task,probability,count";
inline constexpr const char* kVerifySummaryHeader = "check,evaluated,violations,min_margin";

/// Synthetic family for the config; infeasible specs surface as kConfig.
SyntheticFamily build_family(const ExperimentConfig& cfg);

/// Population variance of the alpha column.
double alpha_variance(std::span<const TaskMetrics> metrics);

struct RunResult {
  std::filesystem::path directory;
  std::vector<std::string> artifacts;
  std::optional<double> unfairness;
  std::size_t violations = 0;
};

struct SimulateOptions {
  std::size_t steps = 1000;
  bool trace = false;
};

RunResult run_simulate(const ExperimentConfig& cfg, const SimulateOptions& opts, std::ostream& log);
RunResult run_metrics(const ExperimentConfig& cfg, std::ostream& log);
/// Throws kTheoremViolation after writing its artifacts when any check fails.
RunResult run_verify_theorems(const ExperimentConfig& cfg, std::size_t trials, std::ostream& log);
RunResult run_train_scdf(const ExperimentConfig& cfg, std::ostream& log);
RunResult run_sweep_temperature(const ExperimentConfig& cfg, const std::vector<double>& temps,
                                const std::optional<std::string>& quality_path, std::ostream& log);
RunResult run_balance_data(const ExperimentConfig& cfg, const std::vector<double>& grid,
                           std::ostream& log);
RunResult run_estimate_representation(const ExperimentConfig& cfg, std::ostream& log);

/// Renders SVG plots from a run directory's CSVs; never recomputes metrics.
RunResult run_report(const std::filesystem::path& run_dir, std::ostream& log);

/// task,quality CSV into a map.
std::map<std::string, double> load_quality_file(const std::string& path);

/// Comma-separated list of numbers, e.g. "0,0.25,0.5".
std::vector<double> parse_number_list(std::string_view text);

}  // namespace specfair
