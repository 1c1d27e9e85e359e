#pragma once

#include <stdexcept>
#include <string>

namespace specfair {

// Mirrors specfair_status in the C API; values must stay in sync.
enum class ErrorCode : int {
  kVocabularyMismatch = 1,
  kDegenerateResidual = 2,
  kInvalidTemperature = 3,
  kDomain = 4,
  kInvalidDistribution = 5,
  kInfeasibleSpec = 6,
  kEnumerationTooLarge = 7,
  kConfig = 8,
  kIo = 9,
  kTheoremViolation = 10,
  kTrainingDiverged = 11,
  kInvalidArgument = 12,
  kInternal = 13,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

}  // namespace specfair
