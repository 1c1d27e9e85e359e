#pragma once

// Counter-based random streams (Philox4x64-10).
//
// A stream is identified by (master seed, purpose) in the key and by
// (task, step) in the upper counter words, so any unit of work can derive its
// own generator without touching shared state:
//
//   Rng rng = Rng::stream(seed, StreamPurpose::kTraining, task_index, step);
//
// Rng models std::uniform_random_bit_generator.

#include <array>
#include <cstdint>
#include <limits>

namespace specfair {

using PhiloxBlock = std::array<std::uint64_t, 4>;
using PhiloxKey = std::array<std::uint64_t, 2>;

/// One Philox4x64 bijection with 10 rounds.
PhiloxBlock philox4x64_10(PhiloxBlock counter, PhiloxKey key);

enum class StreamPurpose : std::uint64_t {
  kFamily = 1,
  kSimulate = 2,
  kTraining = 3,
  kProxy = 4,
  kRepresentation = 5,
  kVerify = 6,
  kBalance = 7,
  kTest = 99,
};

class Rng {
 public:
  using result_type = std::uint64_t;

  Rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t task = 0,
      std::uint64_t step = 0);

  static Rng stream(std::uint64_t seed, StreamPurpose purpose,
                    std::uint64_t task = 0, std::uint64_t step = 0) {
    return Rng(seed, static_cast<std::uint64_t>(purpose), task, step);
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()();

  /// Uniform double in [0, 1) from the top 53 bits.
  double uniform();
  /// Uniform integer in [0, n) by rejection; n > 0.
  std::uint64_t below(std::uint64_t n);
  /// Standard normal via Box-Muller.
  double normal();

  /// Derive an independent child stream, e.g. one per trial.
  Rng split(std::uint64_t child) const;

 private:
  PhiloxKey key_;
  PhiloxBlock counter_;
  PhiloxBlock buffer_{};
  int position_ = 4;
};

}  // namespace specfair
