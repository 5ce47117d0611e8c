#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

namespace protocolnet {

enum class RouteMode { AutoProtocol, DecisionSupport };

/// "AP" or "CDS".
const char* route_mode_name(RouteMode mode);

inline constexpr std::size_t kDefaultTopK = 5;
inline constexpr std::size_t kMaxTopK = 10;

struct RankedProtocol {
  std::string label;
  std::size_t index = 0;
  double score = 0.0;  // normalized
};

struct RoutedRecommendation {
  Eigen::VectorXd normalized_scores;
  double delta = 0.0;
  RouteMode mode = RouteMode::DecisionSupport;
  std::vector<RankedProtocol> ranked;  // 1 entry for AP, k for CDS
  double threshold_used = 0.0;
};

/// (v - min v) / sum(v - min v); a constant vector maps to the uniform vector.
/// Throws VectorTooShort (< 2 entries) or NonFiniteInput.
Eigen::VectorXd normalize_scores(const Eigen::Ref<const Eigen::VectorXd>& logits);

/// Largest minus second-largest entry. Throws VectorTooShort.
double compute_delta(const Eigen::Ref<const Eigen::VectorXd>& normalized);

/// Indices sorted by score descending, ties by ascending index.
std::vector<std::size_t> rank_order(const Eigen::Ref<const Eigen::VectorXd>& scores);

/// AP when delta >= threshold (top-1), otherwise CDS (top-k).
/// Throws ShapeMismatch, or InvalidK unless 1 <= k <= min(10, n).
RoutedRecommendation route(const Eigen::Ref<const Eigen::VectorXd>& logits, const std::vector<std::string>& labels,
                           double threshold, std::size_t k = kDefaultTopK);

}  // namespace protocolnet
