#include "specfair/fairness.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "specfair/csv.hpp"
#include "specfair/error.hpp"

namespace specfair {

TaskMetrics task_metrics(const TabularSoftmaxModel& verifier, const TabularSoftmaxModel& drafter,
                         const Task& task, const SpecConfig& cfg, double epsilon) {
  cfg.validate();
  TaskMetrics m;
  m.task = task.id();
  const TabularSoftmaxModel* posterior = task.posterior();
  double r_p = 0.0;
  double r_q = 0.0;
  for (const auto& wc : task.prefixes()) {
    const Categorical p = verifier.predict(wc.context);
    const Categorical q = drafter.predict(wc.context);
    const double a = acceptance_overlap(p, q);
    m.alpha += wc.weight * a;
    m.kl += wc.weight * kl_divergence(p, q, epsilon);
    m.ce += wc.weight * cross_entropy(p, q, epsilon);
    m.speedup += wc.weight * speedup_closed(a, cfg);
    if (posterior != nullptr) {
      const Categorical u = posterior->predict(wc.context);
      r_p += wc.weight * total_variation(u, p);
      r_q += wc.weight * total_variation(u, q);
    }
  }
  m.alpha = std::clamp(m.alpha, 0.0, 1.0);
  m.alpha_speedup = speedup_closed(m.alpha, cfg);
  m.envelope = certified_envelope(m.ce, cfg);
  if (posterior != nullptr) {
    m.r_p = r_p;
    m.r_q = r_q;
  }
  m.exact = true;
  return m;
}

TaskMetrics task_metrics_sampled(const TabularSoftmaxModel& verifier,
                                 const TabularSoftmaxModel& drafter, const Task& task,
                                 const SpecConfig& cfg, std::size_t samples, Rng& rng,
                                 double epsilon) {
  cfg.validate();
  if (samples < 2) fail(ErrorCode::kDomain, "Monte Carlo metrics need at least 2 samples");
  TaskMetrics m;
  m.task = task.id();
  const TabularSoftmaxModel* posterior = task.posterior();
  double alpha_sq = 0.0;
  double ce_sq = 0.0;
  double r_p = 0.0;
  double r_q = 0.0;
  for (std::size_t i = 0; i < samples; ++i) {
    const Context& s = task.sample_prefix(rng);
    const Categorical p = verifier.predict(s);
    const Categorical q = drafter.predict(s);
    const double a = acceptance_overlap(p, q);
    const double ce = cross_entropy(p, q, epsilon);
    m.alpha += a;
    alpha_sq += a * a;
    m.ce += ce;
    ce_sq += ce * ce;
    m.kl += kl_divergence(p, q, epsilon);
    m.speedup += speedup_closed(a, cfg);
    if (posterior != nullptr) {
      const Categorical u = posterior->predict(s);
      r_p += total_variation(u, p);
      r_q += total_variation(u, q);
    }
  }
  const double n = static_cast<double>(samples);
  m.alpha /= n;
  m.ce /= n;
  m.kl /= n;
  m.speedup /= n;
  m.alpha_se = std::sqrt(std::max(alpha_sq / n - m.alpha * m.alpha, 0.0) / (n - 1.0));
  m.ce_se = std::sqrt(std::max(ce_sq / n - m.ce * m.ce, 0.0) / (n - 1.0));
  m.alpha = std::clamp(m.alpha, 0.0, 1.0);
  m.alpha_speedup = speedup_closed(m.alpha, cfg);
  m.envelope = certified_envelope(m.ce, cfg);
  if (posterior != nullptr) {
    m.r_p = r_p / n;
    m.r_q = r_q / n;
  }
  m.exact = false;
  return m;
}

std::vector<TaskMetrics> family_metrics(const TabularSoftmaxModel& verifier,
                                        const TabularSoftmaxModel& drafter,
                                        const TaskFamily& family, const SpecConfig& cfg,
                                        double epsilon) {
  std::vector<TaskMetrics> out;
  out.reserve(family.size());
  for (const auto& task : family) out.push_back(task_metrics(verifier, drafter, task, cfg, epsilon));
  return out;
}

std::size_t argmin_divergence(std::span<const double> d_values) {
  if (d_values.empty()) fail(ErrorCode::kDomain, "no divergences given");
  return static_cast<std::size_t>(std::min_element(d_values.begin(), d_values.end()) -
                                  d_values.begin());
}

double unfairness(std::span<const double> d_values) {
  const double d_min = d_values[argmin_divergence(d_values)];
  double sum = 0.0;
  for (double d : d_values) sum += (d - d_min) * (d - d_min);
  return sum / static_cast<double>(d_values.size());
}

std::vector<double> divergences(std::span<const TaskMetrics> metrics) {
  std::vector<double> out;
  out.reserve(metrics.size());
  for (const auto& m : metrics) out.push_back(m.ce);
  return out;
}

double divergence_to_alpha_bound(double d) {
  if (!(d >= 0.0)) fail(ErrorCode::kDomain, "divergence must be >= 0");
  return std::clamp(1.0 - std::sqrt(d / 2.0), 0.0, kEnvelopeClamp);
}

double certified_envelope(double d, const SpecConfig& cfg) {
  return speedup_closed(divergence_to_alpha_bound(d), cfg);
}

ChainReport chain_report(const TaskMetrics& metrics, const SpecConfig& cfg) {
  ChainReport r;
  r.task = metrics.task;
  r.speedup = metrics.speedup;
  r.alpha_bound = speedup_closed(metrics.alpha, cfg);
  r.kl_bound = speedup_closed(divergence_to_alpha_bound(metrics.kl), cfg);
  r.ce_bound = certified_envelope(metrics.ce, cfg);
  r.margin_jensen = r.speedup - r.alpha_bound;
  r.margin_pinsker = r.alpha_bound - r.kl_bound;
  r.margin_entropy = r.kl_bound - r.ce_bound;
  r.margin_total = r.speedup - r.ce_bound;
  r.ok = r.margin_jensen >= -kBoundSlack && r.margin_pinsker >= -kBoundSlack &&
         r.margin_entropy >= -kBoundSlack && r.margin_total >= -kBoundSlack;
  return r;
}

std::vector<ChainReport> validate_chain(const TabularSoftmaxModel& verifier,
                                        const TabularSoftmaxModel& drafter,
                                        const TaskFamily& family, const SpecConfig& cfg) {
  std::vector<ChainReport> out;
  for (const auto& m : family_metrics(verifier, drafter, family, cfg)) {
    out.push_back(chain_report(m, cfg));
  }
  return out;
}

std::vector<FitnessReport> validate_fitness_bound(std::span<const TaskMetrics> metrics) {
  std::vector<FitnessReport> out;
  for (const auto& m : metrics) {
    FitnessReport r;
    r.task = m.task;
    r.alpha = m.alpha;
    if (!m.r_p || !m.r_q || *m.r_p > *m.r_q) {
      r.skipped = true;
      out.push_back(r);
      continue;
    }
    r.estimate = 1.0 - *m.r_q;
    r.deviation = std::abs(m.alpha - r.estimate);
    r.bound = *m.r_p;
    r.ok = r.deviation <= r.bound + kBoundSlack;
    out.push_back(r);
  }
  return out;
}

DisparityReport validate_disparity_condition(const TaskMetrics& task_i,
                                             const TaskMetrics& task_j,
                                             const SpecConfig& cfg) {
  if (!task_i.r_p || !task_i.r_q || !task_j.r_p || !task_j.r_q) {
    fail(ErrorCode::kInvalidArgument, "disparity condition needs task posteriors");
  }
  DisparityReport r;
  r.condition = *task_j.r_q - *task_i.r_q > *task_i.r_p + *task_j.r_p;
  r.alpha_gap = task_i.alpha - task_j.alpha;
  r.alpha_speedup_gap = task_i.alpha_speedup - task_j.alpha_speedup;
  r.expected_speedup_gap = task_i.speedup - task_j.speedup;
  if (r.condition) {
    const double floor = r.alpha_gap / (cfg.gamma * cfg.cost_ratio + 1.0);
    r.ok = r.alpha_gap > 0.0 && r.alpha_speedup_gap >= floor - kBoundSlack;
  }
  return r;
}

RepresentationEstimate estimate_representation(const TabularSoftmaxModel& drafter,
                                               const std::vector<std::string>& task_ids,
                                               const TaskClassifier& classifier,
                                               std::size_t k, std::size_t generation_length,
                                               Rng& rng) {
  if (k < 1) fail(ErrorCode::kDomain, "K must be >= 1");
  if (generation_length < 1) fail(ErrorCode::kDomain, "generation length must be >= 1");
  std::vector<std::size_t> counts(task_ids.size(), 0);
  RepresentationEstimate est;
  est.samples = k;
  const Context empty;
  for (std::size_t i = 0; i < k; ++i) {
    const auto generation = vanilla_decode(drafter, empty, generation_length, rng);
    const auto label = classifier(generation);
    if (!label || *label >= counts.size()) {
      ++est.rejected;
      continue;
    }
    ++counts[*label];
  }
  const std::size_t accepted = k - est.rejected;
  for (std::size_t t = 0; t < task_ids.size(); ++t) {
    const double prob =
        accepted == 0 ? 0.0 : static_cast<double>(counts[t]) / static_cast<double>(accepted);
    est.ranked.push_back({task_ids[t], prob, counts[t]});
  }
  std::stable_sort(est.ranked.begin(), est.ranked.end(),
                   [](const auto& a, const auto& b) { return a.probability > b.probability; });
  return est;
}

TaskClassifier signature_classifier(std::vector<std::pair<Token, Token>> ranges) {
  return [ranges = std::move(ranges)](std::span<const Token> tokens) -> std::optional<std::size_t> {
    std::vector<std::size_t> votes(ranges.size(), 0);
    for (Token t : tokens) {
      for (std::size_t i = 0; i < ranges.size(); ++i) {
        if (t >= ranges[i].first && t < ranges[i].second) {
          ++votes[i];
          break;
        }
      }
    }
    const auto best = std::max_element(votes.begin(), votes.end());
    if (best == votes.end() || *best == 0) return std::nullopt;
    if (std::count(votes.begin(), votes.end(), *best) > 1) return std::nullopt;
    return static_cast<std::size_t>(best - votes.begin());
  };
}

void write_metrics_csv(std::ostream& out, std::span<const TaskMetrics> metrics) {
  CsvWriter csv(out);
  csv.header(kMetricsCsvHeader);
  for (const auto& m : metrics) {
    csv.row({m.task, format_number(m.alpha), format_number(m.kl), format_number(m.ce),
             format_number(m.speedup), format_optional(m.r_p), format_optional(m.r_q),
             format_number(m.envelope)});
  }
}

}  // namespace specfair
