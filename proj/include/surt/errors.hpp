#pragma once

#include <stdexcept>
#include <string>

namespace surt {

// Stable error codes surfaced in error.json and mapped to exit codes by the
// CLI: validation-class errors exit 2, numerical-class errors exit 3.
enum class ErrorCode {
  InvalidConfig,
  InvalidArgument,
  EmptyData,
  ConstantOutcome,
  NonBinaryOutcome,
  UnknownCategoryLevel,
  NonFiniteValue,
  ParseError,
  IoError,
  MissingColumn,
  NotPositiveDefinite,
  InvalidDf,
  TailSamplingFailure,
  CalibrationBracketFailure,
  DegenerateDesign,
  ZeroVariance,
  NumericalFailure,
};

const char* error_code_name(ErrorCode code);
bool error_code_is_numerical(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace surt
