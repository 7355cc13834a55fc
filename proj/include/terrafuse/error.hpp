#pragma once

#include <stdexcept>
#include <string>

namespace terrafuse {

enum class ErrorCode {
  kInvalidArgument,
  kInsufficientData,
  kNoConvergence,
  kVerticalLine,
  kEmptyWindow,
  kEmptyTrajectory,
  kEmptyInput,
  kEmptyPatch,
  kEmptyMap,
  kInvalidSample,
  kInvalidStream,
  kUndefinedNdvi,
  kInvalidSpectrum,
  kInvalidTime,
  kInvalidTimestamp,
  kMissingManifest,
  kBadSchema,
  kNonMonotone,
  kMissingPayload,
  kParseError,
  kIoError,
};

// Kebab-case tag, e.g. "insufficient-data".
const char* error_code_name(ErrorCode code);

// Every library failure is reported through this exception type. The message
// is prefixed with the error tag so CLI output stays greppable.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }
  // Message without the tag.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

}  // namespace terrafuse
