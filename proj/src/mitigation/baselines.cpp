#include <cmath>

#include "specfair/csv.hpp"
#include "specfair/error.hpp"
#include "specfair/mitigation.hpp"

namespace specfair {
namespace {

struct ExactTaskFit {
  double d = 0.0;
  double alpha = 0.0;
};

ExactTaskFit measure(const TabularSoftmaxModel& verifier, const TabularSoftmaxModel& drafter,
                     const Task& task, double epsilon) {
  ExactTaskFit fit;
  for (const auto& wc : task.prefixes()) {
    const Categorical p = verifier.predict(wc.context);
    const Categorical q = drafter.predict(wc.context);
    fit.d += wc.weight * cross_entropy(p, q, epsilon);
    fit.alpha += wc.weight * acceptance_overlap(p, q);
  }
  return fit;
}

}  // namespace

std::vector<SweepRow> temperature_sweep(const TabularSoftmaxModel& verifier,
                                        const TabularSoftmaxModel& drafter,
                                        const TaskFamily& family, std::span<const double> temps,
                                        const std::map<std::string, double>& quality,
                                        double epsilon) {
  for (double t : temps) {
    if (std::isnan(t) || t < 0.0) fail(ErrorCode::kInvalidTemperature, "temperatures must be >= 0");
  }
  std::vector<SweepRow> rows;
  for (const auto& task : family) {
    const auto beta = quality.find(task.id());
    for (double t : temps) {
      double alpha = 0.0;
      for (const auto& wc : task.prefixes()) {
        const Categorical p = temperature_scale(verifier.predict(wc.context), t, epsilon);
        const Categorical q = temperature_scale(drafter.predict(wc.context), t, epsilon);
        alpha += wc.weight * acceptance_overlap(p, q);
      }
      SweepRow row{task.id(), t, alpha, std::nullopt};
      if (beta != quality.end()) row.quality_adjusted = alpha * beta->second;
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

void write_sweep_csv(std::ostream& out, std::span<const SweepRow> rows) {
  CsvWriter csv(out);
  csv.header(kSweepHeader);
  for (const auto& r : rows) {
    csv.row({r.task, format_number(r.temp), format_number(r.alpha),
             format_optional(r.quality_adjusted)});
  }
}

std::vector<BalanceRow> data_balance_finetune(const TabularSoftmaxModel& verifier,
                                              const TabularSoftmaxModel& drafter,
                                              const Task& task_a, const Task& task_b,
                                              std::span<const double> mix_grid,
                                              const TrainerConfig& trainer, double epsilon) {
  trainer.validate();
  const std::size_t batch = 2 * trainer.batch_per_task;
  std::vector<BalanceRow> rows;
  for (double mix : mix_grid) {
    if (!(mix >= 0.0 && mix <= 1.0)) fail(ErrorCode::kInvalidArgument, "mix must be in [0, 1]");
    TabularSoftmaxModel q = drafter;
    Optimizer optimizer(trainer);
    const auto n_b = static_cast<std::size_t>(std::llround(mix * static_cast<double>(batch)));
    const std::size_t n_a = batch - n_b;
    for (std::size_t step = 0; step < trainer.steps; ++step) {
      // Same stream for every mix so grid points differ only by the proportion.
      Rng rng = Rng::stream(trainer.seed, StreamPurpose::kBalance, 0, step);
      auto contexts = sample_batch(task_a, n_a, rng);
      auto from_b = sample_batch(task_b, n_b, rng);
      contexts.insert(contexts.end(), from_b.begin(), from_b.end());
      auto est = estimate_task_ce(q, verifier, contexts, trainer.exact_x_expectation, &rng, epsilon);
      LogitGradient direction;
      for (const auto& [key, row] : est.gradient) accumulate(direction, key, row, -1.0);
      optimizer.apply(q, direction);
    }
    const auto fit_a = measure(verifier, q, task_a, epsilon);
    const auto fit_b = measure(verifier, q, task_b, epsilon);
    const double d[] = {fit_a.d, fit_b.d};
    rows.push_back({mix, fit_a.d, fit_b.d, fit_a.alpha, fit_b.alpha, unfairness(d)});
  }
  return rows;
}

void write_balance_csv(std::ostream& out, std::span<const BalanceRow> rows) {
  CsvWriter csv(out);
  csv.header(kBalanceHeader);
  for (const auto& r : rows) {
    csv.row({format_number(r.mix), format_number(r.d_a), format_number(r.d_b),
             format_number(r.alpha_a), format_number(r.alpha_b), format_number(r.unfairness)});
  }
}

}  // namespace specfair
