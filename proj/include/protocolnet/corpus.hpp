#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "protocolnet/text.hpp"

namespace protocolnet {

struct Order {
  std::string id;
  std::string indication;
  std::string diagnosis;
  std::string protocol;

  bool operator==(const Order&) const = default;
};

/// Per-field token dictionaries, each sorted and duplicate-free.
struct Vocabulary {
  std::vector<std::string> indication_tokens;
  std::vector<std::string> diagnosis_tokens;

  std::size_t dimension() const { return indication_tokens.size() + diagnosis_tokens.size(); }
  bool operator==(const Vocabulary&) const = default;
};

/// Binary presence vector stored by its set bits.
/// Indication bits occupy [0, |indication_tokens|); diagnosis bits follow.
struct FeatureVector {
  std::size_t dimension = 0;
  std::vector<std::uint32_t> active;  // ascending

  template <typename Scalar>
  Eigen::Matrix<Scalar, 1, Eigen::Dynamic> dense() const {
    Eigen::Matrix<Scalar, 1, Eigen::Dynamic> row = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>::Zero(
        static_cast<Eigen::Index>(dimension));
    for (auto i : active) row[i] = Scalar(1);
    return row;
  }

  bool operator==(const FeatureVector&) const = default;
};

/// What encode_order kept and dropped per field, in token order.
struct EncodingEcho {
  std::vector<std::string> indication_dropped;
  std::vector<std::string> diagnosis_dropped;
};

struct SplitDataset {
  std::vector<Order> train;
  std::vector<Order> test;
  std::uint64_t split_seed = 0;
  double train_fraction = 0.7;
};

Vocabulary build_vocabulary(const std::vector<Order>& train_orders,
                            const StopwordList& stopwords = StopwordList::english());

FeatureVector encode_order(const Order& order, const Vocabulary& vocab,
                           const StopwordList& stopwords = StopwordList::english(),
                           EncodingEcho* echo = nullptr);

std::vector<FeatureVector> encode_orders(const std::vector<Order>& orders, const Vocabulary& vocab,
                                         const StopwordList& stopwords = StopwordList::english());

/// Stack encoded orders into a batch matrix, one order per row.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> stack_features(
    const std::vector<FeatureVector>& features, const std::vector<std::size_t>& rows) {
  const auto dim = features.empty() ? 0 : features[rows.empty() ? 0 : rows.front()].dimension;
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> batch =
      Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>::Zero(
          static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(dim));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (auto i : features[rows[r]].active) batch(static_cast<Eigen::Index>(r), i) = Scalar(1);
  }
  return batch;
}

/// Per-class random partition. Classes with a single order go to train.
SplitDataset stratified_split(const std::vector<Order>& orders, double train_fraction, std::uint64_t seed);

/// Order CSV: header `id,indication,diagnosis,protocol`, RFC-4180 quoting.
std::vector<Order> load_orders(const std::filesystem::path& path);
void write_orders(const std::filesystem::path& path, const std::vector<Order>& orders);

/// Class labels in first-seen order.
std::vector<std::string> distinct_protocols(const std::vector<Order>& orders);

}  // namespace protocolnet
