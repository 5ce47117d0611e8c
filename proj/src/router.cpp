#include "protocolnet/router.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "protocolnet/error.hpp"

namespace protocolnet {

const char* route_mode_name(RouteMode mode) { return mode == RouteMode::AutoProtocol ? "AP" : "CDS"; }

Eigen::VectorXd normalize_scores(const Eigen::Ref<const Eigen::VectorXd>& logits) {
  if (logits.size() < 2) throw Error(Errc::VectorTooShort, "need at least 2 scores");
  if (!logits.allFinite()) throw Error(Errc::NonFiniteInput, "scores must be finite");
  const Eigen::VectorXd shifted = logits.array() - logits.minCoeff();
  const double total = shifted.sum();
  if (!(total > 0.0)) return Eigen::VectorXd::Constant(logits.size(), 1.0 / static_cast<double>(logits.size()));
  return shifted / total;
}

double compute_delta(const Eigen::Ref<const Eigen::VectorXd>& normalized) {
  if (normalized.size() < 2) throw Error(Errc::VectorTooShort, "need at least 2 scores");
  double first = -std::numeric_limits<double>::infinity();
  double second = first;
  for (Eigen::Index i = 0; i < normalized.size(); ++i) {
    const double v = normalized[i];
    if (v > first) {
      second = first;
      first = v;
    } else if (v > second) {
      second = v;
    }
  }
  return first - second;
}

std::vector<std::size_t> rank_order(const Eigen::Ref<const Eigen::VectorXd>& scores) {
  std::vector<std::size_t> order(static_cast<std::size_t>(scores.size()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[static_cast<Eigen::Index>(a)] > scores[static_cast<Eigen::Index>(b)];
  });
  return order;
}

RoutedRecommendation route(const Eigen::Ref<const Eigen::VectorXd>& logits, const std::vector<std::string>& labels,
                           double threshold, std::size_t k) {
  if (static_cast<std::size_t>(logits.size()) != labels.size()) {
    throw Error(Errc::ShapeMismatch, "logit count differs from label count");
  }
  const std::size_t k_max = std::min(kMaxTopK, labels.size());
  if (k < 1 || k > k_max) throw Error(Errc::InvalidK, "k must lie in [1, " + std::to_string(k_max) + "]");
  if (!(threshold >= 0.0)) throw Error(Errc::ValidationFailure, "threshold must be >= 0");

  RoutedRecommendation rec;
  rec.normalized_scores = normalize_scores(logits);
  rec.delta = compute_delta(rec.normalized_scores);
  rec.threshold_used = threshold;
  rec.mode = rec.delta >= threshold ? RouteMode::AutoProtocol : RouteMode::DecisionSupport;

  // Rank on the raw logits so normalization rounding cannot reorder near-ties.
  const auto order = rank_order(logits);
  const std::size_t count = rec.mode == RouteMode::AutoProtocol ? 1 : k;
  for (std::size_t r = 0; r < count; ++r) {
    const auto i = order[r];
    rec.ranked.push_back({labels[i], i, rec.normalized_scores[static_cast<Eigen::Index>(i)]});
  }
  return rec;
}

}  // namespace protocolnet
