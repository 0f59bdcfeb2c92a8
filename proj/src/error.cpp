#include "scorehub/error.hpp"

namespace scorehub {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kDuplicateName: return "DuplicateName";
    case ErrorCode::kCycleDetected: return "CycleDetected";
    case ErrorCode::kUnknownDependent: return "UnknownDependent";
    case ErrorCode::kDatasourceError: return "DatasourceError";
    case ErrorCode::kTypeMismatch: return "TypeMismatch";
    case ErrorCode::kRevisionNotFound: return "RevisionNotFound";
    case ErrorCode::kUpstreamError: return "UpstreamError";
    case ErrorCode::kDegenerateData: return "DegenerateData";
    case ErrorCode::kNonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kZeroRate: return "ZeroRate";
    case ErrorCode::kTooFewExamplesPerClass: return "TooFewExamplesPerClass";
    case ErrorCode::kInvalidParams: return "InvalidParams";
    case ErrorCode::kEmptyPredictions: return "EmptyPredictions";
    case ErrorCode::kCorruptModelFile: return "CorruptModelFile";
    case ErrorCode::kIncompatibleFormatVersion: return "IncompatibleFormatVersion";
    case ErrorCode::kUnknownFieldPath: return "UnknownFieldPath";
    case ErrorCode::kSyntaxError: return "SyntaxError";
    case ErrorCode::kUnknownMetric: return "UnknownMetric";
    case ErrorCode::kBoundOutOfRange: return "BoundOutOfRange";
    case ErrorCode::kModelNotFound: return "ModelNotFound";
    case ErrorCode::kContextNotFound: return "ContextNotFound";
    case ErrorCode::kFeatureExtractionError: return "FeatureExtractionError";
    case ErrorCode::kTimeoutError: return "TimeoutError";
    case ErrorCode::kLoadShed: return "LoadShed";
    case ErrorCode::kMalformedRequest: return "MalformedRequest";
    case ErrorCode::kMalformedLabelRecord: return "MalformedLabelRecord";
    case ErrorCode::kUnknownLabel: return "UnknownLabel";
    case ErrorCode::kDuplicateRevision: return "DuplicateRevision";
    case ErrorCode::kInvalidFlag: return "InvalidFlag";
    case ErrorCode::kManifestError: return "ManifestError";
    case ErrorCode::kExtractionFailed: return "ExtractionFailed";
    case ErrorCode::kIoError: return "IoError";
    case ErrorCode::kInternalError: return "InternalError";
  }
  return "InternalError";
}

}  // namespace scorehub
