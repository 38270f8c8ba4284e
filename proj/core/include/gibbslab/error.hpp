#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace gibbslab {

enum class ErrorCode {
  kEmptyDataset,
  kDimMismatch,
  kInsufficientTrials,
  kAlphaRange,
  kNotPositiveDefinite,
  kNoClosedForm,
  kNoGradient,
  kSgldDiverged,
  kSgldUnstable,
  kNoConvergence,
  kDomain,
  kRegimeInvalid,
  kHessianNotConstant,
  kSingularHessian,
  kInvalidArgument,
  kConfig,
  kIo,
};

/// Kebab-case identifier for an error code, e.g. "empty-dataset".
std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail);

  ErrorCode code() const noexcept { return code_; }
  std::string_view code_name() const { return to_string(code_); }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& detail);

inline void require(bool condition, ErrorCode code, const std::string& detail) {
  if (!condition) fail(code, detail);
}

}  // namespace gibbslab
