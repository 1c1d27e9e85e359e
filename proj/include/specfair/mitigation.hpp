#pragma once

// Drafter fine-tuning against speed-up unfairness: the fairness-weighted
// descent direction, its mini-batch estimators, the stochastic training loop,
// and the two baselines (joint temperature sweep, data-balanced finetuning).
// The verifier is only ever read.

#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "specfair/fairness.hpp"
#include "specfair/rng.hpp"
#include "specfair/spec_engine.hpp"
#include "specfair/tabular_model.hpp"
#include "specfair/task.hpp"

namespace specfair {

enum class OptimizerKind { kSgd, kMomentum, kAdam };

std::string_view to_string(OptimizerKind kind);
OptimizerKind parse_optimizer(std::string_view name);

struct TrainerConfig {
  std::size_t steps = 2000;
  std::size_t batch_per_task = 8;
  double step_size = 0.1;
  OptimizerKind optimizer = OptimizerKind::kSgd;
  double momentum = 0.9;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  /// Max L2 norm of the update direction; 0 disables clipping.
  double grad_clip = 0.0;
  /// Tasks sampled per step; 0 means every task.
  std::size_t tasks_per_step = 0;
  /// Stop when |U_t - U_{t-window}| < tol; 0 disables early stopping.
  double convergence_tol = 0.0;
  std::size_t convergence_window = 50;
  /// Abort when exact U exceeds this multiple of its initial value.
  double divergence_factor = 10.0;
  /// Take the expectation over x ~ p exactly instead of drawing one x per prefix.
  bool exact_x_expectation = true;
  int proxy_gamma = 5;
  std::size_t proxy_prefixes = 8;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Sparse gradient (or update direction) over drafter logit rows.
using LogitGradient = std::map<ContextKey, std::vector<double>>;

void accumulate(LogitGradient& into, const ContextKey& key, std::span<const double> row,
                double scale);
double l2_norm(const LogitGradient& g);

struct TaskEstimate {
  double d_hat = 0.0;
  LogitGradient gradient;
};

std::vector<Context> sample_batch(const Task& task, std::size_t size, Rng& rng);

/// Mini-batch cross-entropy D_hat and its gradient with respect to the
/// drafter logits. With exact_x the per-prefix gradient is q - p; otherwise
/// one x ~ p is drawn per prefix and the row is q - onehot(x).
TaskEstimate estimate_task_ce(const TabularSoftmaxModel& drafter,
                              const TabularSoftmaxModel& verifier,
                              std::span<const Context> batch, bool exact_x, Rng* rng,
                              double epsilon = kEpsilonFloor);

struct WeightedDirection {
  LogitGradient delta;
  /// (D_hat_T - D_hat_min) per task; the star entry is exactly 0.
  std::vector<double> weights;
  std::size_t star = 0;
};

/// delta = -(1/m) sum_T (D_hat_T - D_hat_min) grad D_hat_T, with D_hat_min held
/// constant (lowest index wins ties).
WeightedDirection fairness_weighted_direction(std::span<const double> d_hats,
                                              std::span<const LogitGradient> gradients);

/// Applies a descent direction to the drafter's logits.
class Optimizer {
 public:
  explicit Optimizer(const TrainerConfig& cfg) : cfg_(cfg) {}

  void apply(TabularSoftmaxModel& model, const LogitGradient& direction);

 private:
  TrainerConfig cfg_;
  LogitGradient velocity_;
  LogitGradient first_moment_;
  LogitGradient second_moment_;
  std::uint64_t t_ = 0;
};

struct TrainLogRow {
  std::string timestamp;
  std::size_t step = 0;
  std::string star_task;
  std::string task;
  double d_hat = 0.0;
  double acceptance = 0.0;
  std::optional<double> tv_q;
  std::optional<double> tv_p;
};

inline constexpr const char* kTrainLogHeader =
    "timestamp,step,star_task,task,d_hat,acceptance,tv_q,tv_p";

void write_train_log_row(std::ostream& out, const TrainLogRow& row);

struct ScdfStep {
  std::size_t step = 0;
  std::vector<std::size_t> tasks;  ///< family indices sampled this step
  std::vector<double> d_hats;
  std::vector<double> weights;
  std::size_t star = 0;  ///< family index of the star task
  double exact_u = 0.0;  ///< after the update
};

struct ScdfResult {
  TabularSoftmaxModel drafter;
  std::vector<ScdfStep> history;
  std::vector<TrainLogRow> log;
  double initial_u = 0.0;
  bool converged = false;
  std::uint64_t verifier_hash_before = 0;
  std::uint64_t verifier_hash_after = 0;
};

/// Stochastic corrective drafter fine-tuning. `log_csv`, when given, receives
/// the header and each step's rows, flushed per step. Throws
/// kTrainingDiverged when exact U grows past divergence_factor x its start.
ScdfResult run_scdf(const TabularSoftmaxModel& verifier, const TabularSoftmaxModel& drafter,
                    const TaskFamily& family, const TrainerConfig& trainer,
                    double epsilon = kEpsilonFloor, std::ostream* log_csv = nullptr);

/// Greedy single-pass acceptance estimate: mean contiguous accepted prefix
/// length over gamma, where each greedy draft survives when a uniform draw
/// falls below min(1, p/q).
double acceptance_proxy(const TabularSoftmaxModel& verifier, const TabularSoftmaxModel& drafter,
                        const Task& task, int gamma, std::size_t n_prefixes, Rng& rng);

/// Exact U over the family, using current models.
double exact_unfairness(const TabularSoftmaxModel& verifier, const TabularSoftmaxModel& drafter,
                        const TaskFamily& family, double epsilon = kEpsilonFloor);

struct SweepRow {
  std::string task;
  double temp = 0.0;
  double alpha = 0.0;
  std::optional<double> quality_adjusted;
};

inline constexpr const char* kSweepHeader = "task,temp,alpha,quality_adjusted";

/// Exact alpha_T with verifier and drafter scaled by the same temperature.
/// `quality` maps task id to its quality scalar beta.
std::vector<SweepRow> temperature_sweep(const TabularSoftmaxModel& verifier,
                                        const TabularSoftmaxModel& drafter,
                                        const TaskFamily& family, std::span<const double> temps,
                                        const std::map<std::string, double>& quality,
                                        double epsilon = kEpsilonFloor);

void write_sweep_csv(std::ostream& out, std::span<const SweepRow> rows);

struct BalanceRow {
  double mix = 0.0;
  double d_a = 0.0;
  double d_b = 0.0;
  double alpha_a = 0.0;
  double alpha_b = 0.0;
  double unfairness = 0.0;
};

inline constexpr const char* kBalanceHeader = "mix,d_a,d_b,alpha_a,alpha_b,unfairness";

/// For each mix (share of task_b in every batch): clone the drafter, train on
/// plain cross-entropy for trainer.steps steps with 2 * batch_per_task
/// prefixes per batch, and measure both tasks exactly.
std::vector<BalanceRow> data_balance_finetune(const TabularSoftmaxModel& verifier,
                                              const TabularSoftmaxModel& drafter,
                                              const Task& task_a, const Task& task_b,
                                              std::span<const double> mix_grid,
                                              const TrainerConfig& trainer,
                                              double epsilon = kEpsilonFloor);

void write_balance_csv(std::ostream& out, std::span<const BalanceRow> rows);

/// ISO-8601 UTC with milliseconds, e.g. 2026-01-31T12:00:00.000Z.
std::string utc_timestamp();

}  // namespace specfair
