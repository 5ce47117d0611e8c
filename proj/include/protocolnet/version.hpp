#pragma once

namespace protocolnet {
inline constexpr const char* kToolName = "protocolnet";
inline constexpr const char* kToolVersion = "0.1.0";
}  // namespace protocolnet
