#pragma once

// Experiment configuration: strict JSON parsing with per-field diagnostics.
// The schema and defaults are documented in docs/config.md.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "specfair/mitigation.hpp"
#include "specfair/spec_engine.hpp"
#include "specfair/synthetic_family.hpp"

namespace specfair {

struct OutputConfig {
  std::string directory = "runs/latest";
  bool emit_svg = true;
};

struct RepresentationConfig {
  std::size_t k = 100000;
  std::size_t generation_length = 3;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::size_t vocab_size = 0;
  std::size_t context_order = 1;
  double epsilon_floor = kEpsilonFloor;
  FamilySpec family;
  /// Replace every task with a relabelled copy of the first one.
  bool identical_tasks = false;
  /// Per-task quality scalar beta for quality-adjusted acceptance.
  std::map<std::string, double> quality;
  SpecConfig spec;
  TrainerConfig trainer;
  /// trainer.seed was given explicitly rather than inherited from seed.
  bool trainer_seed_explicit = false;
  OutputConfig outputs;
  RepresentationConfig representation;
  /// Tasks with larger prefix support use Monte Carlo metrics.
  std::size_t max_exact_support = 1000000;
  std::size_t monte_carlo_samples = 20000;

  /// Sets the master seed and, unless given explicitly, the trainer seed.
  void override_seed(std::uint64_t value);
};

/// Parses and validates a config document. Throws ErrorCode::kConfig with a
/// "line L, column C" location for syntax errors or a "/json/pointer" field
/// path for schema and invariant violations.
ExperimentConfig parse_config(std::string_view json);
ExperimentConfig load_config(const std::string& path);

/// Fully resolved config, every default filled in.
std::string config_to_json(const ExperimentConfig& cfg);

/// FNV-1a 64 of config_to_json, as 16 hex digits.
std::string config_hash(const ExperimentConfig& cfg);

/// Seed precedence: flag > SPECFAIR_SEED environment variable > config.
/// Throws kConfig when the environment value is not an unsigned integer.
void apply_seed_precedence(ExperimentConfig& cfg, std::optional<std::uint64_t> flag_seed);

}  // namespace specfair
