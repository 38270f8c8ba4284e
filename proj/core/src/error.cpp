#include "gibbslab/error.hpp"

namespace gibbslab {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kEmptyDataset: return "empty-dataset";
    case ErrorCode::kDimMismatch: return "dim-mismatch";
    case ErrorCode::kInsufficientTrials: return "insufficient-trials";
    case ErrorCode::kAlphaRange: return "alpha-range";
    case ErrorCode::kNotPositiveDefinite: return "not-positive-definite";
    case ErrorCode::kNoClosedForm: return "no-closed-form";
    case ErrorCode::kNoGradient: return "no-gradient";
    case ErrorCode::kSgldDiverged: return "sgld-diverged";
    case ErrorCode::kSgldUnstable: return "sgld-unstable";
    case ErrorCode::kNoConvergence: return "no-convergence";
    case ErrorCode::kDomain: return "domain";
    case ErrorCode::kRegimeInvalid: return "regime-invalid";
    case ErrorCode::kHessianNotConstant: return "hessian-not-constant";
    case ErrorCode::kSingularHessian: return "singular-hessian";
    case ErrorCode::kInvalidArgument: return "invalid-argument";
    case ErrorCode::kConfig: return "config";
    case ErrorCode::kIo: return "io";
  }
  return "unknown";
}

Error::Error(ErrorCode code, const std::string& detail)
    : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code) {}

void fail(ErrorCode code, const std::string& detail) { throw Error(code, detail); }

}  // namespace gibbslab
