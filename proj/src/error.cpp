#include "canids/error.hpp"

namespace canids {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::MalformedLine: return "MalformedLine";
    case ErrorCode::BadHex: return "BadHex";
    case ErrorCode::DlcOutOfRange: return "DlcOutOfRange";
    case ErrorCode::PayloadLengthMismatch: return "PayloadLengthMismatch";
    case ErrorCode::IdOutOfRange: return "IdOutOfRange";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::EmptyIdPool: return "EmptyIdPool";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::WindowOutsideStream: return "WindowOutsideStream";
    case ErrorCode::TargetIdAbsent: return "TargetIdAbsent";
    case ErrorCode::SourceAfterInjection: return "SourceAfterInjection";
    case ErrorCode::EmptySourceSegment: return "EmptySourceSegment";
    case ErrorCode::WindowTooSmall: return "WindowTooSmall";
    case ErrorCode::EmptyBatch: return "EmptyBatch";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::FiniteViolation: return "FiniteViolation";
    case ErrorCode::EmptySegment: return "EmptySegment";
    case ErrorCode::SegmentOutOfRange: return "SegmentOutOfRange";
    case ErrorCode::BadProbability: return "BadProbability";
    case ErrorCode::EmptyBatchLabels: return "EmptyBatchLabels";
    case ErrorCode::CacheMismatch: return "CacheMismatch";
    case ErrorCode::SingleClassDataset: return "SingleClassDataset";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::BadConfig: return "BadConfig";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::EmptyMatrix: return "EmptyMatrix";
  }
  return "Unknown";
}

}  // namespace canids
