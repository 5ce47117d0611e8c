#pragma once

#include <filesystem>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace protocolnet {

/// Set of tokens removed during normalization.
class StopwordList {
 public:
  /// The embedded 179-word English list.
  static const StopwordList& english();

  /// One token per line; blank lines and `#` comments are skipped.
  static StopwordList from_file(const std::filesystem::path& path);

  explicit StopwordList(std::set<std::string, std::less<>> words) : words_(std::move(words)) {}

  bool contains(std::string_view token) const { return words_.find(token) != words_.end(); }
  std::size_t size() const { return words_.size(); }

 private:
  std::set<std::string, std::less<>> words_;
};

/// Lowercase, map every byte outside [a-z0-9] to a space, split, drop stopwords.
/// Duplicates and original order are preserved.
std::vector<std::string> normalize_text(std::string_view raw,
                                        const StopwordList& stopwords = StopwordList::english());

}  // namespace protocolnet
