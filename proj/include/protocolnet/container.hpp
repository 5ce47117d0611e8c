#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "protocolnet/model.hpp"

namespace protocolnet {

/// Model container layout (all integers little-endian):
///
///   "PRTM" | u32 version | u64 metadata length | metadata (UTF-8 JSON)
///   | u64 payload length | payload | u32 CRC-32 of payload
///
/// The metadata holds the config, label list, level, vocabulary with per-field
/// SHA-256 digests, creation info and the tensor table. The payload is float32
/// arrays in tensor-table order: the trainable tensors followed by the batch-norm
/// running means and variances.
inline constexpr std::uint32_t kContainerVersion = 1;

std::string serialize_model(const MlpModel& model);
MlpModel deserialize_model(const std::string& bytes);

void save_model(const MlpModel& model, const std::filesystem::path& path);
/// Throws FormatVersionMismatch, ChecksumMismatch, TruncatedFile or ShapeMismatch.
MlpModel load_model(const std::filesystem::path& path);

}  // namespace protocolnet
