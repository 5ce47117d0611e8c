#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace protocolnet::csv {

using Row = std::vector<std::string>;

/// RFC-4180 reader. Quoted fields may contain commas, doubled quotes and newlines.
/// Each row carries the 1-based line number it started on.
struct Record {
  Row fields;
  std::size_t line = 0;
};

std::vector<Record> parse(std::string_view text);
std::vector<Record> read_file(const std::filesystem::path& path);

/// Quotes only when the field needs it.
std::string escape(std::string_view field);
void write_row(std::ostream& out, const Row& row);

}  // namespace protocolnet::csv
