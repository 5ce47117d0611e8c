#include "protocolnet/error.hpp"

namespace protocolnet {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::EmptyTrainingSet: return "EmptyTrainingSet";
    case Errc::EmptyDataset: return "EmptyDataset";
    case Errc::MalformedRow: return "MalformedRow";
    case Errc::MissingColumn: return "MissingColumn";
    case Errc::DanglingMapping: return "DanglingMapping";
    case Errc::DuplicateLabel: return "DuplicateLabel";
    case Errc::NonTotalMapping: return "NonTotalMapping";
    case Errc::UnknownLabel: return "UnknownLabel";
    case Errc::LevelOrderViolation: return "LevelOrderViolation";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::BatchTooSmall: return "BatchTooSmall";
    case Errc::LabelOutOfRange: return "LabelOutOfRange";
    case Errc::FormatVersionMismatch: return "FormatVersionMismatch";
    case Errc::ChecksumMismatch: return "ChecksumMismatch";
    case Errc::TruncatedFile: return "TruncatedFile";
    case Errc::VectorTooShort: return "VectorTooShort";
    case Errc::NonFiniteInput: return "NonFiniteInput";
    case Errc::InvalidK: return "InvalidK";
    case Errc::LabelSpaceMismatch: return "LabelSpaceMismatch";
    case Errc::InvalidRank: return "InvalidRank";
    case Errc::BadBinEdges: return "BadBinEdges";
    case Errc::EmptyRecords: return "EmptyRecords";
    case Errc::IoFailure: return "IoFailure";
    case Errc::OutOfRangeFraction: return "OutOfRangeFraction";
    case Errc::InvalidSpec: return "InvalidSpec";
    case Errc::PayloadTooLarge: return "PayloadTooLarge";
    case Errc::ModelNotReady: return "ModelNotReady";
    case Errc::ValidationFailure: return "ValidationFailure";
    case Errc::StorageFailure: return "StorageFailure";
    case Errc::UnknownLevel: return "UnknownLevel";
    case Errc::ModelLoadFailure: return "ModelLoadFailure";
    case Errc::BindFailure: return "BindFailure";
    case Errc::UnknownSubcommand: return "UnknownSubcommand";
    case Errc::FlagValidation: return "FlagValidation";
  }
  return "Unknown";
}

}  // namespace protocolnet
