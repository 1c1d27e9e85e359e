#pragma once

// Task-level aggregation of acceptance, divergence and speed-up, the
// unfairness metric U, and numeric validators for the divergence/fitness
// bounds.

#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "specfair/dist.hpp"
#include "specfair/spec_engine.hpp"
#include "specfair/task.hpp"

namespace specfair {

struct TaskMetrics {
  std::string task;
  double alpha = 0.0;  ///< E_s[acceptance_overlap]
  double kl = 0.0;     ///< E_s[KL(p || q)]
  double ce = 0.0;     ///< D_T = E_s[H(p, q)]
  double speedup = 0.0;  ///< S_T = E_s[speedup(alpha(s))]
  /// speedup evaluated at alpha_T; speedup - alpha_speedup is the Jensen slack.
  double alpha_speedup = 0.0;
  std::optional<double> r_p;
  std::optional<double> r_q;
  /// certified_envelope(ce)
  double envelope = 0.0;
  /// Expectation over the full prefix support (true) or a Monte Carlo estimate.
  bool exact = true;
  /// Standard errors, populated for Monte Carlo estimates only.
  double alpha_se = 0.0;
  double ce_se = 0.0;

  double jensen_slack() const { return speedup - alpha_speedup; }
};

/// Exact expectations over the task's prefix support. Rng-free.
TaskMetrics task_metrics(const TabularSoftmaxModel& verifier, const TabularSoftmaxModel& drafter,
                         const Task& task, const SpecConfig& cfg,
                         double epsilon = kEpsilonFloor);

/// Monte Carlo estimate from `samples` prefix draws, with standard errors.
TaskMetrics task_metrics_sampled(const TabularSoftmaxModel& verifier,
                                 const TabularSoftmaxModel& drafter, const Task& task,
                                 const SpecConfig& cfg, std::size_t samples, Rng& rng,
                                 double epsilon = kEpsilonFloor);

std::vector<TaskMetrics> family_metrics(const TabularSoftmaxModel& verifier,
                                        const TabularSoftmaxModel& drafter,
                                        const TaskFamily& family, const SpecConfig& cfg,
                                        double epsilon = kEpsilonFloor);

/// (1/m) sum_T (D_T - D_min)^2. Throws kDomain on an empty list.
double unfairness(std::span<const double> d_values);
/// Index of D_min; lowest index wins ties.
std::size_t argmin_divergence(std::span<const double> d_values);
std::vector<double> divergences(std::span<const TaskMetrics> metrics);

inline constexpr double kEnvelopeClamp = 1.0 - 1e-9;

/// 1 - sqrt(d / 2), clamped into [0, 1 - 1e-9].
double divergence_to_alpha_bound(double d);
/// g(d) = f_gamma(clamped 1 - sqrt(d/2)) / (1 + gamma c); decreasing in d.
double certified_envelope(double d, const SpecConfig& cfg);

inline constexpr double kBoundSlack = 1e-9;

struct ChainReport {
  std::string task;
  double speedup = 0.0;         ///< S_T
  double alpha_bound = 0.0;     ///< f(alpha_T) / (1 + gamma c)
  double kl_bound = 0.0;        ///< f(1 - sqrt(KL_T/2)) / (1 + gamma c)
  double ce_bound = 0.0;        ///< f(1 - sqrt(D_T/2)) / (1 + gamma c)
  double margin_jensen = 0.0;   ///< speedup - alpha_bound
  double margin_pinsker = 0.0;  ///< alpha_bound - kl_bound
  double margin_entropy = 0.0;  ///< kl_bound - ce_bound
  double margin_total = 0.0;    ///< speedup - ce_bound, the end-to-end certificate
  bool ok = true;
};

ChainReport chain_report(const TaskMetrics& metrics, const SpecConfig& cfg);
/// Checks S_T >= f(alpha_T)/(1+gc) >= f(1-sqrt(KL_T/2))/(1+gc) >= f(1-sqrt(D_T/2))/(1+gc)
/// and the end-to-end S_T >= g(D_T) for every task, each with 1e-9 slack.
std::vector<ChainReport> validate_chain(const TabularSoftmaxModel& verifier,
                                        const TabularSoftmaxModel& drafter,
                                        const TaskFamily& family, const SpecConfig& cfg);

struct FitnessReport {
  std::string task;
  bool skipped = false;  ///< no posterior, or r_p > r_q
  double alpha = 0.0;
  double estimate = 0.0;  ///< 1 - r_q
  double deviation = 0.0;  ///< |alpha - (1 - r_q)|
  double bound = 0.0;      ///< r_p
  bool ok = true;
};

/// |alpha_T - (1 - r_q)| <= r_p + 1e-9 for tasks with r_p <= r_q.
std::vector<FitnessReport> validate_fitness_bound(std::span<const TaskMetrics> metrics);

struct DisparityReport {
  bool condition = false;  ///< r_q^j - r_q^i > r_p^i + r_p^j
  double alpha_gap = 0.0;  ///< alpha_i - alpha_j
  /// [f(alpha_i) - f(alpha_j)] / (1 + gamma c); bounded below by alpha_gap / (1 + gamma c).
  double alpha_speedup_gap = 0.0;
  /// S_Ti - S_Tj with S_T = E_s[speedup(alpha(s))]. Informational only: it
  /// carries each task's Jensen slack and has no lower bound from alpha_gap.
  double expected_speedup_gap = 0.0;
  bool ok = true;
};

/// Asserts the strict acceptance gap and the speed-up gap whenever the
/// sufficient condition holds; no assertion otherwise.
DisparityReport validate_disparity_condition(const TaskMetrics& task_i,
                                             const TaskMetrics& task_j,
                                             const SpecConfig& cfg);

/// Maps a generated sequence to a task index, or nullopt when unclassifiable.
using TaskClassifier = std::function<std::optional<std::size_t>(std::span<const Token>)>;

struct RepresentationEntry {
  std::string task;
  double probability = 0.0;
  std::size_t count = 0;
};

struct RepresentationEstimate {
  /// Sorted by probability, most represented first; ties keep task order.
  std::vector<RepresentationEntry> ranked;
  std::size_t rejected = 0;
  std::size_t samples = 0;
};

/// Samples K generations of `generation_length` tokens from the drafter on the
/// empty context and tallies the classifier's verdicts. Rejected samples are
/// excluded from the normalization.
RepresentationEstimate estimate_representation(const TabularSoftmaxModel& drafter,
                                               const std::vector<std::string>& task_ids,
                                               const TaskClassifier& classifier,
                                               std::size_t k, std::size_t generation_length,
                                               Rng& rng);

/// Majority vote over tokens that fall in a task signature; ties and
/// sequences with no signature tokens are rejected.
TaskClassifier signature_classifier(std::vector<std::pair<Token, Token>> ranges);

inline constexpr const char* kMetricsCsvHeader = "task,alpha,kl,ce,speedup,r_p,r_q,envelope";

void write_metrics_csv(std::ostream& out, std::span<const TaskMetrics> metrics);

}  // namespace specfair
