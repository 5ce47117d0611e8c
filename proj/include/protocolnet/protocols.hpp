#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "protocolnet/corpus.hpp"

namespace protocolnet {

/// Label granularity, finest first.
enum class Level { Local = 0, Acr = 1, General = 2 };

std::string_view level_name(Level level);
/// Accepts "local", "acr", "general" (case-insensitive); throws UnknownLevel.
Level parse_level(std::string_view name);

/// Three-level label space with total many-to-one maps Local -> ACR -> General.
/// Immutable once built.
class ProtocolHierarchy {
 public:
  ProtocolHierarchy() = default;

  /// Validates and builds from (local, acr, general) triples. Label order is first appearance.
  static ProtocolHierarchy from_rows(const std::vector<std::array<std::string, 3>>& rows);

  const std::vector<std::string>& labels(Level level) const { return labels_[static_cast<int>(level)]; }

  bool contains(std::string_view label, Level level) const;
  std::size_t index_of(std::string_view label, Level level) const;

  /// Index-space coarsening map for `from` -> `to` (to must be equal or coarser).
  std::vector<std::size_t> index_map(Level from, Level to) const;

  std::vector<std::array<std::string, 3>> rows() const;

 private:
  std::array<std::vector<std::string>, 3> labels_;
  std::array<std::unordered_map<std::string, std::size_t>, 3> index_;
  std::vector<std::size_t> local_to_acr_;
  std::vector<std::size_t> acr_to_general_;
};

/// Hierarchy CSV: header `local,acr,general`, one row per Local protocol.
ProtocolHierarchy load_hierarchy(const std::filesystem::path& path);
void write_hierarchy(const std::filesystem::path& path, const ProtocolHierarchy& hierarchy);

std::string coarsen(const ProtocolHierarchy& hierarchy, std::string_view label, Level from, Level to);

std::vector<Order> relabel_dataset(const std::vector<Order>& orders, const ProtocolHierarchy& hierarchy, Level level);

/// Random surjective hierarchy of the given sizes (sizes must be non-increasing).
ProtocolHierarchy random_hierarchy(std::size_t n_local, std::size_t n_acr, std::size_t n_general, std::uint64_t seed);

}  // namespace protocolnet
