#include "osmda/error.hpp"

namespace osmda {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid-argument";
    case ErrorCode::kInvalidGeometry: return "invalid-geometry";
    case ErrorCode::kIoError: return "io-error";
    case ErrorCode::kRemoteError: return "remote-error";
    case ErrorCode::kTransportError: return "transport-error";
    case ErrorCode::kLabelFailure: return "label-failure";
    case ErrorCode::kCurationCollapse: return "curation-collapse";
    case ErrorCode::kInvalidSample: return "invalid-sample";
    case ErrorCode::kLoadError: return "load-error";
    case ErrorCode::kJudgeFailure: return "judge-failure";
    case ErrorCode::kEmptyCorpus: return "empty-corpus";
    case ErrorCode::kMissingArtifact: return "missing-artifact";
  }
  return "unknown";
}

}  // namespace osmda
