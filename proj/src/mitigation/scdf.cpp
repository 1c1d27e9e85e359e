#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <numeric>

#include "specfair/csv.hpp"
#include "specfair/error.hpp"
#include "specfair/mitigation.hpp"

namespace specfair {
namespace {

// Stream for task selection; kept apart from per-task streams (task < 2^32).
constexpr std::uint64_t kSelectionStream = std::uint64_t{1} << 32;

std::vector<std::size_t> choose_tasks(std::size_t m, std::size_t per_step, Rng& rng) {
  std::vector<std::size_t> all(m);
  std::iota(all.begin(), all.end(), 0);
  if (per_step == 0 || per_step >= m) return all;
  for (std::size_t i = 0; i < per_step; ++i) {
    std::swap(all[i], all[i + rng.below(m - i)]);
  }
  all.resize(per_step);
  std::sort(all.begin(), all.end());
  return all;
}

std::optional<double> batch_tv(const TabularSoftmaxModel* posterior,
                               const TabularSoftmaxModel& model,
                               std::span<const Context> batch) {
  if (posterior == nullptr) return std::nullopt;
  double sum = 0.0;
  for (const auto& s : batch) sum += total_variation(posterior->predict(s), model.predict(s));
  return sum / static_cast<double>(batch.size());
}

}  // namespace

void accumulate(LogitGradient& into, const ContextKey& key, std::span<const double> row,
                double scale) {
  auto [it, inserted] = into.try_emplace(key, row.size(), 0.0);
  (void)inserted;
  for (std::size_t x = 0; x < row.size(); ++x) it->second[x] += scale * row[x];
}

double l2_norm(const LogitGradient& g) {
  double sum = 0.0;
  for (const auto& [key, row] : g) {
    for (double v : row) sum += v * v;
  }
  return std::sqrt(sum);
}

std::vector<Context> sample_batch(const Task& task, std::size_t size, Rng& rng) {
  std::vector<Context> batch;
  batch.reserve(size);
  for (std::size_t i = 0; i < size; ++i) batch.push_back(task.sample_prefix(rng));
  return batch;
}

TaskEstimate estimate_task_ce(const TabularSoftmaxModel& drafter,
                              const TabularSoftmaxModel& verifier,
                              std::span<const Context> batch, bool exact_x, Rng* rng,
                              double epsilon) {
  if (batch.empty()) fail(ErrorCode::kDomain, "empty mini-batch");
  if (!exact_x && rng == nullptr) {
    fail(ErrorCode::kInvalidArgument, "sampled x-expectation needs an rng");
  }
  TaskEstimate est;
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (const auto& s : batch) {
    const Categorical p = verifier.predict(s);
    const Categorical q = drafter.predict(s);
    est.d_hat += inv * cross_entropy(p, q, epsilon);
    std::vector<double> row(q.size());
    if (exact_x) {
      for (std::size_t x = 0; x < q.size(); ++x) row[x] = q[x] - p[x];
    } else {
      const std::size_t drawn = sample_index(p, rng->uniform());
      for (std::size_t x = 0; x < q.size(); ++x) row[x] = q[x] - (x == drawn ? 1.0 : 0.0);
    }
    accumulate(est.gradient, drafter.key(s), row, inv);
  }
  return est;
}

WeightedDirection fairness_weighted_direction(std::span<const double> d_hats,
                                              std::span<const LogitGradient> gradients) {
  if (d_hats.size() != gradients.size()) {
    fail(ErrorCode::kInvalidArgument, "one gradient per task estimate is required");
  }
  if (d_hats.size() < 2) fail(ErrorCode::kDomain, "the weighted direction needs >= 2 tasks");
  WeightedDirection out;
  out.star = argmin_divergence(d_hats);
  const double d_min = d_hats[out.star];
  const double inv_m = 1.0 / static_cast<double>(d_hats.size());
  out.weights.resize(d_hats.size());
  for (std::size_t t = 0; t < d_hats.size(); ++t) {
    out.weights[t] = d_hats[t] - d_min;
    if (out.weights[t] == 0.0) continue;
    for (const auto& [key, row] : gradients[t]) {
      accumulate(out.delta, key, row, -inv_m * out.weights[t]);
    }
  }
  return out;
}

double exact_unfairness(const TabularSoftmaxModel& verifier, const TabularSoftmaxModel& drafter,
                        const TaskFamily& family, double epsilon) {
  std::vector<double> d;
  d.reserve(family.size());
  for (const auto& task : family) {
    double ce = 0.0;
    for (const auto& wc : task.prefixes()) {
      ce += wc.weight * cross_entropy(verifier.predict(wc.context), drafter.predict(wc.context),
                                      epsilon);
    }
    d.push_back(ce);
  }
  return unfairness(d);
}

double acceptance_proxy(const TabularSoftmaxModel& verifier, const TabularSoftmaxModel& drafter,
                        const Task& task, int gamma, std::size_t n_prefixes, Rng& rng) {
  if (gamma < 1) fail(ErrorCode::kInvalidArgument, "gamma must be >= 1");
  if (n_prefixes < 1) fail(ErrorCode::kDomain, "acceptance proxy needs n_prefixes >= 1");
  double total = 0.0;
  for (std::size_t n = 0; n < n_prefixes; ++n) {
    Context running = task.sample_prefix(rng);
    std::size_t accepted = 0;
    bool contiguous = true;
    for (int i = 0; i < gamma; ++i) {
      const Categorical q = drafter.predict(running);
      const Categorical p = verifier.predict(running);
      const std::size_t x = q.argmax();
      const double ratio = q[x] > 0.0 ? std::min(1.0, p[x] / q[x]) : 1.0;
      const bool survives = rng.uniform() < ratio;
      contiguous = contiguous && survives;
      if (contiguous) ++accepted;
      running.push_back(static_cast<Token>(x));
    }
    total += static_cast<double>(accepted) / static_cast<double>(gamma);
  }
  return std::clamp(total / static_cast<double>(n_prefixes), 0.0, 1.0);
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()) % 1000;
  const std::time_t secs = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&secs, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%S", &tm);
  char out[40];
  std::snprintf(out, sizeof(out), "%s.%03dZ", buf, static_cast<int>(ms.count()));
  return out;
}

void write_train_log_row(std::ostream& out, const TrainLogRow& row) {
  CsvWriter(out).row({row.timestamp, std::to_string(row.step), row.star_task, row.task,
                      format_number(row.d_hat), format_number(row.acceptance),
                      format_optional(row.tv_q), format_optional(row.tv_p)});
}

ScdfResult run_scdf(const TabularSoftmaxModel& verifier, const TabularSoftmaxModel& drafter,
                    const TaskFamily& family, const TrainerConfig& trainer, double epsilon,
                    std::ostream* log_csv) {
  trainer.validate();
  if (verifier.vocab_size() != drafter.vocab_size()) {
    fail(ErrorCode::kVocabularyMismatch, "verifier and drafter vocabularies differ");
  }
  ScdfResult result{drafter, {}, {}, 0.0, false, verifier.parameter_hash(), 0};
  TabularSoftmaxModel& q = result.drafter;
  Optimizer optimizer(trainer);
  result.initial_u = exact_unfairness(verifier, q, family, epsilon);
  if (log_csv != nullptr) {
    *log_csv << kTrainLogHeader << '\n';
    log_csv->flush();
  }

  for (std::size_t step = 0; step < trainer.steps; ++step) {
    Rng selector = Rng::stream(trainer.seed, StreamPurpose::kTraining, kSelectionStream, step);
    ScdfStep record;
    record.step = step;
    record.tasks = choose_tasks(family.size(), trainer.tasks_per_step, selector);

    std::vector<LogitGradient> grads;
    std::vector<TrainLogRow> rows;
    for (std::size_t t : record.tasks) {
      const Task& task = family[t];
      Rng rng = Rng::stream(trainer.seed, StreamPurpose::kTraining, t, step);
      const auto batch = sample_batch(task, trainer.batch_per_task, rng);
      auto est = estimate_task_ce(q, verifier, batch, trainer.exact_x_expectation, &rng, epsilon);
      Rng proxy_rng = Rng::stream(trainer.seed, StreamPurpose::kProxy, t, step);
      TrainLogRow row;
      row.step = step;
      row.task = task.id();
      row.d_hat = est.d_hat;
      row.acceptance =
          acceptance_proxy(verifier, q, task, trainer.proxy_gamma, trainer.proxy_prefixes, proxy_rng);
      row.tv_q = batch_tv(task.posterior(), q, batch);
      row.tv_p = batch_tv(task.posterior(), verifier, batch);
      rows.push_back(std::move(row));
      record.d_hats.push_back(est.d_hat);
      grads.push_back(std::move(est.gradient));
    }

    if (record.tasks.size() >= 2) {
      auto direction = fairness_weighted_direction(record.d_hats, grads);
      record.weights = std::move(direction.weights);
      record.star = record.tasks[direction.star];
      optimizer.apply(q, direction.delta);
    } else {
      // A single sampled task is its own minimizer: zero weight, no update.
      record.weights.assign(record.tasks.size(), 0.0);
      record.star = record.tasks.front();
    }

    const std::string timestamp = utc_timestamp();
    for (auto& row : rows) {
      row.timestamp = timestamp;
      row.star_task = family[record.star].id();
      if (log_csv != nullptr) write_train_log_row(*log_csv, row);
      result.log.push_back(std::move(row));
    }
    if (log_csv != nullptr) log_csv->flush();

    record.exact_u = exact_unfairness(verifier, q, family, epsilon);
    result.history.push_back(std::move(record));
    const double u_now = result.history.back().exact_u;

    if (!std::isfinite(u_now) ||
        (u_now > trainer.divergence_factor * result.initial_u && u_now > 1e-12)) {
      fail(ErrorCode::kTrainingDiverged,
           "training diverged at step " + std::to_string(step) + ": U = " + format_number(u_now) +
               " vs initial " + format_number(result.initial_u));
    }
    const std::size_t window = trainer.convergence_window;
    if (trainer.convergence_tol > 0.0 && result.history.size() > window) {
      const double before = result.history[result.history.size() - 1 - window].exact_u;
      if (std::abs(u_now - before) < trainer.convergence_tol) {
        result.converged = true;
        break;
      }
    }
  }
  result.verifier_hash_after = verifier.parameter_hash();
  return result;
}

}  // namespace specfair
