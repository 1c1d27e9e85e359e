#include "specfair/dist.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "specfair/error.hpp"

namespace specfair {
namespace {

void require_same_vocabulary(const Categorical& p, const Categorical& q) {
  if (p.size() != q.size()) {
    fail(ErrorCode::kVocabularyMismatch,
         "vocabulary mismatch: " + std::to_string(p.size()) + " vs " +
             std::to_string(q.size()));
  }
}

}  // namespace

Categorical::Categorical(std::vector<double> probs) : probs_(std::move(probs)) {
  if (probs_.size() < 2) {
    fail(ErrorCode::kInvalidDistribution,
         "categorical needs a vocabulary of at least 2 tokens");
  }
  if (probs_.size() > kMaxVocabulary) {
    fail(ErrorCode::kInvalidDistribution,
         "vocabulary larger than " + std::to_string(kMaxVocabulary));
  }
  double total = 0.0;
  for (double v : probs_) {
    if (!std::isfinite(v) || v < 0.0) {
      fail(ErrorCode::kInvalidDistribution,
           "categorical entries must be finite and non-negative");
    }
    total += v;
  }
  const double off = std::abs(total - 1.0);
  if (off <= kNormTolerance) return;
  if (off > kRenormTolerance) {
    fail(ErrorCode::kInvalidDistribution,
         "categorical sums to " + std::to_string(total) + ", not 1");
  }
  for (double& v : probs_) v /= total;
}

Categorical Categorical::uniform(std::size_t size) {
  return Categorical(std::vector<double>(size, 1.0 / static_cast<double>(size)));
}

Categorical Categorical::one_hot(std::size_t size, std::size_t index) {
  if (index >= size) {
    fail(ErrorCode::kInvalidArgument, "one_hot index out of range");
  }
  std::vector<double> probs(size, 0.0);
  probs[index] = 1.0;
  return Categorical(std::move(probs));
}

Categorical Categorical::from_logits(std::span<const double> logits) {
  if (logits.size() < 2) {
    fail(ErrorCode::kInvalidDistribution,
         "categorical needs a vocabulary of at least 2 tokens");
  }
  const double shift = *std::max_element(logits.begin(), logits.end());
  if (!std::isfinite(shift)) {
    fail(ErrorCode::kInvalidDistribution, "logits must be finite");
  }
  std::vector<double> probs(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    probs[i] = std::exp(logits[i] - shift);
    total += probs[i];
  }
  for (double& v : probs) v /= total;
  return Categorical(std::move(probs), Trusted{});
}

std::size_t Categorical::argmax() const {
  // max_element returns the first maximum, which is the lowest index.
  return static_cast<std::size_t>(
      std::max_element(probs_.begin(), probs_.end()) - probs_.begin());
}

double acceptance_overlap(const Categorical& p, const Categorical& q) {
  require_same_vocabulary(p, q);
  double sum = 0.0;
  for (std::size_t x = 0; x < p.size(); ++x) sum += std::min(p[x], q[x]);
  return std::clamp(sum, 0.0, 1.0);
}

double total_variation(const Categorical& p, const Categorical& q) {
  require_same_vocabulary(p, q);
  double sum = 0.0;
  for (std::size_t x = 0; x < p.size(); ++x) sum += std::abs(p[x] - q[x]);
  return std::clamp(0.5 * sum, 0.0, 1.0);
}

double kl_divergence(const Categorical& p, const Categorical& q, double epsilon) {
  require_same_vocabulary(p, q);
  double sum = 0.0;
  for (std::size_t x = 0; x < p.size(); ++x) {
    if (p[x] <= 0.0) continue;
    sum += p[x] * (std::log(p[x]) - std::log(std::max(q[x], epsilon)));
  }
  return std::max(sum, 0.0);
}

double cross_entropy(const Categorical& p, const Categorical& q, double epsilon) {
  require_same_vocabulary(p, q);
  double sum = 0.0;
  for (std::size_t x = 0; x < p.size(); ++x) {
    if (p[x] <= 0.0) continue;
    sum -= p[x] * std::log(std::max(q[x], epsilon));
  }
  return std::max(sum, 0.0);
}

double entropy(const Categorical& p) {
  double sum = 0.0;
  for (double v : p.probs()) {
    if (v > 0.0) sum -= v * std::log(v);
  }
  return std::max(sum, 0.0);
}

double residual_mass(const Categorical& p, const Categorical& q) {
  require_same_vocabulary(p, q);
  double mass = 0.0;
  for (std::size_t x = 0; x < p.size(); ++x) mass += std::max(p[x] - q[x], 0.0);
  return mass;
}

Categorical residual(const Categorical& p, const Categorical& q) {
  require_same_vocabulary(p, q);
  std::vector<double> positive(p.size());
  bool any_gap = false;
  double mass = 0.0;
  for (std::size_t x = 0; x < p.size(); ++x) {
    const double diff = p[x] - q[x];
    if (diff > kNormTolerance) any_gap = true;
    positive[x] = std::max(diff, 0.0);
    mass += positive[x];
  }
  if (!any_gap || mass <= 0.0) {
    fail(ErrorCode::kDegenerateResidual,
         "residual distribution has zero mass (p == q)");
  }
  for (double& v : positive) v /= mass;
  return Categorical(std::move(positive));
}

Categorical temperature_scale(const Categorical& d, double t, double epsilon) {
  if (std::isnan(t) || t < 0.0) {
    fail(ErrorCode::kInvalidTemperature, "temperature must be >= 0");
  }
  if (t == 0.0) return Categorical::one_hot(d.size(), d.argmax());
  if (std::isinf(t)) return Categorical::uniform(d.size());
  std::vector<double> logits(d.size());
  for (std::size_t x = 0; x < d.size(); ++x) {
    logits[x] = std::log(std::max(d[x], epsilon)) / t;
  }
  return Categorical::from_logits(logits);
}

std::size_t sample_index(const Categorical& d, double uniform01) {
  double cumulative = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t x = 0; x < d.size(); ++x) {
    if (d[x] <= 0.0) continue;
    cumulative += d[x];
    last_positive = x;
    if (uniform01 < cumulative) return x;
  }
  // Rounding left the cumulative sum just under 1.
  return last_positive;
}

}  // namespace specfair
