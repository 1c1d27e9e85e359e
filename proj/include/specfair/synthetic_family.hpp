#pragma once

// Seeded construction of verifier/drafter/posterior triples with requested
// per-task misfits r_p = E_s TV(u, p) and r_q = E_s TV(u, q).
//
// Task i owns the contiguous token signature [i*w, (i+1)*w) with
// w = vocab_size / m. Its prefixes are drawn from that signature, so tasks
// have disjoint context keys and a generated sequence can be attributed to a
// task by its tokens.

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "specfair/task.hpp"
#include "specfair/tabular_model.hpp"

namespace specfair {

struct TaskSpec {
  std::string id;
  std::size_t support_size = 4;
  double r_p = 0.0;
  double r_q = 0.0;
  /// Relative weight of the task in the drafter's empty-context prior.
  double representation = 1.0;
};

struct FamilySpec {
  std::size_t vocab_size = 16;
  std::size_t context_order = 1;
  std::vector<TaskSpec> tasks;
  /// Std-dev of the random posterior logits.
  double posterior_scale = 1.5;
  /// Logit bonus the posterior gives to tokens inside the task signature.
  double signature_bonus = 2.0;
  /// Std-dev of the logits of the random perturbation mixed into u.
  double noise_scale = 3.0;
};

struct TokenRange {
  Token begin = 0;
  Token end = 0;  // exclusive
  bool contains(Token t) const noexcept { return t >= begin && t < end; }
};

struct SyntheticFamily {
  TabularSoftmaxModel verifier;
  TabularSoftmaxModel drafter;
  std::shared_ptr<const TabularSoftmaxModel> posterior;
  TaskFamily family;
  std::vector<TokenRange> signatures;
};

/// Largest misfit any construction can be asked for: 1 - 1/|V|.
double max_feasible_misfit(std::size_t vocab_size);

/// Throws kInfeasibleSpec for misfits outside [0, 1 - 1/|V|], too few tokens
/// per signature, or support sizes the signature cannot provide.
SyntheticFamily make_synthetic_family(const FamilySpec& spec, std::uint64_t seed);

/// Expected TV between `reference` and `model` over the task's prefixes.
double expected_tv(const TabularSoftmaxModel& reference, const TabularSoftmaxModel& model,
                   const Task& task);

}  // namespace specfair
