#pragma once

// Draft-then-verify speculative sampling over tabular models, the vanilla
// baseline, and the closed-form speed-up model.

#include <cstddef>
#include <ostream>
#include <span>
#include <vector>

#include "specfair/rng.hpp"
#include "specfair/tabular_model.hpp"

namespace specfair {

struct SpecConfig {
  int gamma = 4;
  double cost_ratio = 0.1;

  /// Throws kInvalidArgument unless gamma >= 1 and 0 <= cost_ratio < 1.
  void validate() const;
};

struct StepTrace {
  std::vector<Token> drafted;
  std::size_t accepted_prefix_len = 0;
  /// Accepted drafts followed by one correction or bonus token.
  std::vector<Token> emitted;
  /// min(1, p(x)/q(x)) for every drafted token that was scanned.
  std::vector<double> per_token_accept_probs;
};

/// One draft/verify iteration: draw gamma tokens autoregressively from q,
/// accept each with probability min(1, p/q) left to right, resample the first
/// rejected position from the residual, or append a bonus token from p when
/// every draft survives.
StepTrace speculative_step(const TabularSoftmaxModel& verifier,
                           const TabularSoftmaxModel& drafter,
                           std::span<const Token> context, const SpecConfig& cfg,
                           Rng& rng);

inline constexpr std::size_t kMaxEnumerationVocab = 16;
inline constexpr int kMaxEnumerationGamma = 3;

/// Exact law of the first emitted token, summed over every draft sequence and
/// accept/reject branch. Throws kEnumerationTooLarge beyond |V| = 16, gamma = 3.
Categorical enumerate_step_distribution(const TabularSoftmaxModel& verifier,
                                        const TabularSoftmaxModel& drafter,
                                        std::span<const Token> context,
                                        const SpecConfig& cfg);

/// f_gamma(alpha) = sum_{k=0}^{gamma} alpha^k on 0 <= alpha < 1.
double expected_tokens(double alpha, int gamma);
/// expected_tokens(alpha, gamma) / (gamma * c + 1).
double speedup(double alpha, const SpecConfig& cfg);

/// f_gamma extended continuously to alpha == 1 (value gamma + 1). Used where
/// a perfect drafter yields alpha == 1 exactly.
double expected_tokens_closed(double alpha, int gamma);
double speedup_closed(double alpha, const SpecConfig& cfg);

std::vector<Token> vanilla_decode(const TabularSoftmaxModel& verifier,
                                  std::span<const Token> context, std::size_t n_tokens,
                                  Rng& rng);

/// One JSON object per line: {step, context, drafted, accepted_prefix_len, emitted}.
void write_trace_line(std::ostream& out, std::size_t step, std::span<const Token> context,
                      const StepTrace& trace);

}  // namespace specfair
