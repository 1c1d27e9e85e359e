#pragma once

// Exact arithmetic on categorical next-token distributions.
//
// All log quantities are in nats. Wherever a log of q is taken, q is first
// floored at `epsilon` (default kEpsilonFloor) so divergences stay finite.

#include <cstddef>
#include <span>
#include <vector>

namespace specfair {

inline constexpr double kEpsilonFloor = 1e-12;
inline constexpr double kNormTolerance = 1e-12;
inline constexpr double kRenormTolerance = 1e-6;
inline constexpr std::size_t kMaxVocabulary = 1024;

/// A normalized probability vector over a shared vocabulary of size >= 2.
///
/// Construction validates: entries must be finite and >= 0; a total within
/// 1e-12 of one is accepted as is, a total within 1e-6 is renormalized, and
/// anything further off throws ErrorCode::kInvalidDistribution.
class Categorical {
 public:
  explicit Categorical(std::vector<double> probs);

  static Categorical uniform(std::size_t size);
  static Categorical one_hot(std::size_t size, std::size_t index);
  /// softmax(logits), computed with the max-shift for stability.
  static Categorical from_logits(std::span<const double> logits);

  std::size_t size() const noexcept { return probs_.size(); }
  double operator[](std::size_t i) const { return probs_[i]; }
  std::span<const double> probs() const noexcept { return probs_; }
  const std::vector<double>& vector() const noexcept { return probs_; }

  /// Lowest index attaining the maximum probability.
  std::size_t argmax() const;

  bool operator==(const Categorical& other) const = default;

 private:
  struct Trusted {};
  Categorical(std::vector<double> probs, Trusted) : probs_(std::move(probs)) {}

  std::vector<double> probs_;
};

/// Sum_x min(p(x), q(x)); the per-step acceptance probability.
double acceptance_overlap(const Categorical& p, const Categorical& q);

/// 0.5 * Sum_x |p(x) - q(x)|.
double total_variation(const Categorical& p, const Categorical& q);

/// Sum_x p(x) log(p(x) / max(q(x), epsilon)); zero-probability p terms drop.
double kl_divergence(const Categorical& p, const Categorical& q,
                     double epsilon = kEpsilonFloor);

/// -Sum_x p(x) log max(q(x), epsilon).
double cross_entropy(const Categorical& p, const Categorical& q,
                     double epsilon = kEpsilonFloor);

double entropy(const Categorical& p);

/// norm(max(p - q, 0)). Throws kDegenerateResidual when the positive part
/// carries no mass (p == q up to 1e-12 per coordinate).
Categorical residual(const Categorical& p, const Categorical& q);

/// Unnormalized residual mass Sum_x max(p(x) - q(x), 0).
double residual_mass(const Categorical& p, const Categorical& q);

/// t > 0: softmax(log(max(d, epsilon)) / t); t == 0: one-hot at argmax
/// (lowest index on ties); t == +inf: uniform. t < 0 throws
/// kInvalidTemperature.
Categorical temperature_scale(const Categorical& d, double t,
                              double epsilon = kEpsilonFloor);

/// Inverse-CDF draw from d using a uniform variate in [0, 1).
std::size_t sample_index(const Categorical& d, double uniform01);

}  // namespace specfair
