#include "terrafuse/error.hpp"

namespace terrafuse {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid-argument";
    case ErrorCode::kInsufficientData: return "insufficient-data";
    case ErrorCode::kNoConvergence: return "no-convergence";
    case ErrorCode::kVerticalLine: return "vertical-line";
    case ErrorCode::kEmptyWindow: return "empty-window";
    case ErrorCode::kEmptyTrajectory: return "empty-trajectory";
    case ErrorCode::kEmptyInput: return "empty-input";
    case ErrorCode::kEmptyPatch: return "empty-patch";
    case ErrorCode::kEmptyMap: return "empty-map";
    case ErrorCode::kInvalidSample: return "invalid-sample";
    case ErrorCode::kInvalidStream: return "invalid-stream";
    case ErrorCode::kUndefinedNdvi: return "undefined-ndvi";
    case ErrorCode::kInvalidSpectrum: return "invalid-spectrum";
    case ErrorCode::kInvalidTime: return "invalid-time";
    case ErrorCode::kInvalidTimestamp: return "invalid-timestamp";
    case ErrorCode::kMissingManifest: return "missing-manifest";
    case ErrorCode::kBadSchema: return "bad-schema";
    case ErrorCode::kNonMonotone: return "non-monotone";
    case ErrorCode::kMissingPayload: return "missing-payload";
    case ErrorCode::kParseError: return "parse-error";
    case ErrorCode::kIoError: return "io-error";
  }
  return "unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
      code_(code),
      detail_(message) {}

void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace terrafuse
