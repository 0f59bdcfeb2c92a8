#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace scorehub {

// Error taxonomy shared by every module. The string form of a code is what
// appears in ErrorDocument.type on the wire, so names are stable.
enum class ErrorCode {
  kDuplicateName,
  kCycleDetected,
  kUnknownDependent,
  kDatasourceError,
  kTypeMismatch,
  kRevisionNotFound,
  kUpstreamError,
  kDegenerateData,
  kNonFiniteLoss,
  kDimensionMismatch,
  kZeroRate,
  kTooFewExamplesPerClass,
  kInvalidParams,
  kEmptyPredictions,
  kCorruptModelFile,
  kIncompatibleFormatVersion,
  kUnknownFieldPath,
  kSyntaxError,
  kUnknownMetric,
  kBoundOutOfRange,
  kModelNotFound,
  kContextNotFound,
  kFeatureExtractionError,
  kTimeoutError,
  kLoadShed,
  kMalformedRequest,
  kMalformedLabelRecord,
  kUnknownLabel,
  kDuplicateRevision,
  kInvalidFlag,
  kManifestError,
  kExtractionFailed,
  kIoError,
  kInternalError,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }
  std::string_view type() const { return to_string(code_); }

 private:
  ErrorCode code_;
};

}  // namespace scorehub
