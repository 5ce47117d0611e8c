#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace protocolnet {

enum class Errc {
  EmptyTrainingSet,
  EmptyDataset,
  MalformedRow,
  MissingColumn,
  DanglingMapping,
  DuplicateLabel,
  NonTotalMapping,
  UnknownLabel,
  LevelOrderViolation,
  InvalidConfig,
  ShapeMismatch,
  BatchTooSmall,
  LabelOutOfRange,
  FormatVersionMismatch,
  ChecksumMismatch,
  TruncatedFile,
  VectorTooShort,
  NonFiniteInput,
  InvalidK,
  LabelSpaceMismatch,
  InvalidRank,
  BadBinEdges,
  EmptyRecords,
  IoFailure,
  OutOfRangeFraction,
  InvalidSpec,
  PayloadTooLarge,
  ModelNotReady,
  ValidationFailure,
  StorageFailure,
  UnknownLevel,
  ModelLoadFailure,
  BindFailure,
  UnknownSubcommand,
  FlagValidation,
};

std::string_view errc_name(Errc code) noexcept;

/// Single exception type for the library; `code()` identifies the failure.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace protocolnet
