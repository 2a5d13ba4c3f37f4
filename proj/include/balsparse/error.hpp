#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace balsparse {

enum class ErrorKind {
  kNonDivisibleColumns,
  kNonDivisibleDims,
  kUnbalancedPattern,
  kInvalidMatrix,
  kIoFailure,
  kFormatViolation,
  kInvalidArgument,
  kDimensionMismatch,
  kCallbackDimensionMismatch,
  kCallbackRevivedMaskedEntry,
  kIterationOutOfRange,
  kTooManyBlocksForBanks,
  kNonDivisibleLength,
  kProbabilityOutOfRange,
  kKOutOfRange,
  kInvalidConfig,
  kDivergenceDetected,
  kReferenceModelMissing,
  kShapeMismatch,
  kInvalidTimes,
};

std::string_view to_string(ErrorKind kind);

// Every failure raised by the library carries a kind so callers and tests
// can branch on it without parsing the message.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace balsparse
