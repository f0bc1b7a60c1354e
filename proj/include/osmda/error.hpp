#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace osmda {

enum class ErrorCode {
  kInvalidArgument,
  kInvalidGeometry,
  kIoError,
  kRemoteError,
  kTransportError,
  kLabelFailure,
  kCurationCollapse,
  kInvalidSample,
  kLoadError,
  kJudgeFailure,
  kEmptyCorpus,
  kMissingArtifact,
};

std::string_view to_string(ErrorCode code);

// Single exception type for the toolkit; callers branch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Remote failures keep the last HTTP status (0 when no response arrived).
class RemoteError : public Error {
 public:
  RemoteError(const std::string& message, int last_status)
      : Error(ErrorCode::kRemoteError, message), last_status_(last_status) {}

  int last_status() const noexcept { return last_status_; }

 private:
  int last_status_;
};

}  // namespace osmda
