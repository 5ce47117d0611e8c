#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace protocolnet {

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);
std::uint32_t crc32(std::string_view bytes);

}  // namespace protocolnet
