#include "protocolnet/protocols.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <numeric>
#include <random>

#include "protocolnet/csv.hpp"
#include "protocolnet/error.hpp"

namespace protocolnet {

std::string_view level_name(Level level) {
  switch (level) {
    case Level::Local: return "local";
    case Level::Acr: return "acr";
    case Level::General: return "general";
  }
  return "?";
}

Level parse_level(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  if (lower == "local") return Level::Local;
  if (lower == "acr") return Level::Acr;
  if (lower == "general") return Level::General;
  throw Error(Errc::UnknownLevel, "unknown protocol level '" + std::string(name) + "'");
}

ProtocolHierarchy ProtocolHierarchy::from_rows(const std::vector<std::array<std::string, 3>>& rows) {
  ProtocolHierarchy h;
  std::unordered_map<std::string, std::string> acr_parent;
  std::unordered_map<std::string, std::string> local_parent;
  for (const auto& row : rows) {
    const auto& [local, acr, general] = row;
    if (local.empty()) throw Error(Errc::MalformedRow, "hierarchy row with empty local label");
    if (acr.empty() || general.empty()) {
      throw Error(Errc::DanglingMapping, "local label '" + local + "' maps to an undeclared coarser label");
    }
    if (auto [it, inserted] = local_parent.emplace(local, acr); !inserted) {
      throw Error(Errc::DuplicateLabel, "local label '" + local + "' declared more than once");
    }
    if (auto [it, inserted] = acr_parent.emplace(acr, general); !inserted && it->second != general) {
      throw Error(Errc::NonTotalMapping,
                  "ACR label '" + acr + "' maps to both '" + it->second + "' and '" + general + "'");
    }
    auto add = [&h](Level level, const std::string& label) {
      auto& index = h.index_[static_cast<int>(level)];
      if (index.emplace(label, h.labels_[static_cast<int>(level)].size()).second) {
        h.labels_[static_cast<int>(level)].push_back(label);
      }
    };
    add(Level::Local, local);
    add(Level::Acr, acr);
    add(Level::General, general);
  }
  if (h.labels_[0].empty()) throw Error(Errc::NonTotalMapping, "hierarchy has no rows");

  for (const auto& local : h.labels_[0]) h.local_to_acr_.push_back(h.index_[1].at(local_parent.at(local)));
  for (const auto& acr : h.labels_[1]) h.acr_to_general_.push_back(h.index_[2].at(acr_parent.at(acr)));
  return h;
}

bool ProtocolHierarchy::contains(std::string_view label, Level level) const {
  return index_[static_cast<int>(level)].count(std::string(label)) != 0;
}

std::size_t ProtocolHierarchy::index_of(std::string_view label, Level level) const {
  const auto& index = index_[static_cast<int>(level)];
  auto it = index.find(std::string(label));
  if (it == index.end()) {
    throw Error(Errc::UnknownLabel, "'" + std::string(label) + "' is not a " + std::string(level_name(level)) + " label");
  }
  return it->second;
}

std::vector<std::size_t> ProtocolHierarchy::index_map(Level from, Level to) const {
  if (static_cast<int>(to) < static_cast<int>(from)) {
    throw Error(Errc::LevelOrderViolation, "cannot map " + std::string(level_name(from)) + " to finer level " +
                                               std::string(level_name(to)));
  }
  std::vector<std::size_t> map(labels(from).size());
  std::iota(map.begin(), map.end(), 0);
  for (int level = static_cast<int>(from); level < static_cast<int>(to); ++level) {
    const auto& step = level == 0 ? local_to_acr_ : acr_to_general_;
    for (auto& m : map) m = step[m];
  }
  return map;
}

std::vector<std::array<std::string, 3>> ProtocolHierarchy::rows() const {
  std::vector<std::array<std::string, 3>> out;
  for (std::size_t i = 0; i < labels_[0].size(); ++i) {
    auto acr = local_to_acr_[i];
    out.push_back({labels_[0][i], labels_[1][acr], labels_[2][acr_to_general_[acr]]});
  }
  return out;
}

ProtocolHierarchy load_hierarchy(const std::filesystem::path& path) {
  const auto records = csv::read_file(path);
  if (records.empty() || records.front().fields != csv::Row{"local", "acr", "general"}) {
    throw Error(Errc::MissingColumn, path.string() + ": header must be local,acr,general");
  }
  std::vector<std::array<std::string, 3>> rows;
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& f = records[r].fields;
    if (f.size() != 3) {
      throw Error(Errc::MalformedRow, path.string() + ":" + std::to_string(records[r].line) + ": expected 3 columns");
    }
    rows.push_back({f[0], f[1], f[2]});
  }
  return ProtocolHierarchy::from_rows(rows);
}

void write_hierarchy(const std::filesystem::path& path, const ProtocolHierarchy& hierarchy) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::IoFailure, "cannot write " + path.string());
  csv::write_row(out, {"local", "acr", "general"});
  for (const auto& row : hierarchy.rows()) csv::write_row(out, {row[0], row[1], row[2]});
}

std::string coarsen(const ProtocolHierarchy& hierarchy, std::string_view label, Level from, Level to) {
  const auto map = hierarchy.index_map(from, to);
  return hierarchy.labels(to)[map[hierarchy.index_of(label, from)]];
}

std::vector<Order> relabel_dataset(const std::vector<Order>& orders, const ProtocolHierarchy& hierarchy, Level level) {
  const auto map = hierarchy.index_map(Level::Local, level);
  std::vector<Order> out = orders;
  for (auto& order : out) order.protocol = hierarchy.labels(level)[map[hierarchy.index_of(order.protocol, Level::Local)]];
  return out;
}

ProtocolHierarchy random_hierarchy(std::size_t n_local, std::size_t n_acr, std::size_t n_general, std::uint64_t seed) {
  if (n_general == 0 || n_acr < n_general || n_local < n_acr) {
    throw Error(Errc::InvalidSpec, "hierarchy sizes must satisfy local >= acr >= general >= 1");
  }
  std::mt19937_64 rng(seed);
  // Surjective assignment: the first |coarse| children cover every parent, the rest are random.
  auto assign = [&rng](std::size_t n_child, std::size_t n_parent) {
    std::vector<std::size_t> parent(n_child);
    for (std::size_t i = 0; i < n_child; ++i) {
      parent[i] = i < n_parent ? i : std::uniform_int_distribution<std::size_t>(0, n_parent - 1)(rng);
    }
    std::shuffle(parent.begin(), parent.end(), rng);
    return parent;
  };
  const auto acr_of_local = assign(n_local, n_acr);
  const auto general_of_acr = assign(n_acr, n_general);
  std::vector<std::array<std::string, 3>> rows;
  for (std::size_t i = 0; i < n_local; ++i) {
    auto acr = acr_of_local[i];
    rows.push_back({"local_" + std::to_string(i), "acr_" + std::to_string(acr),
                    "general_" + std::to_string(general_of_acr[acr])});
  }
  return ProtocolHierarchy::from_rows(rows);
}

}  // namespace protocolnet
