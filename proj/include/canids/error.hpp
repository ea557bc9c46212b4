#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace canids {

enum class ErrorCode {
  // can_log
  MalformedLine,
  BadHex,
  DlcOutOfRange,
  PayloadLengthMismatch,
  IdOutOfRange,
  IoError,
  // traffic_synth
  EmptyIdPool,
  InvalidSpec,
  WindowOutsideStream,
  TargetIdAbsent,
  SourceAfterInjection,
  EmptySourceSegment,
  // graph_builder
  WindowTooSmall,
  EmptyBatch,
  // numeric_kernel
  ShapeMismatch,
  FiniteViolation,
  EmptySegment,
  SegmentOutOfRange,
  BadProbability,
  // gcn_model
  EmptyBatchLabels,
  CacheMismatch,
  SingleClassDataset,
  EmptyDataset,
  BadMagic,
  VersionMismatch,
  BadConfig,
  // evaluator
  LengthMismatch,
  EmptyInput,
  EmptyMatrix,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Error raised by every module; `code()` is the stable, testable part.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace canids
