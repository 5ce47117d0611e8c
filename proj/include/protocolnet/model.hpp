#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "protocolnet/adam.hpp"
#include "protocolnet/corpus.hpp"
#include "protocolnet/mlp.hpp"
#include "protocolnet/protocols.hpp"

namespace protocolnet {

/// Hidden widths are derived: 4n and 2n.
struct ModelConfig {
  std::size_t input_dim = 0;
  std::size_t n_classes = 0;
  double dropout_rate = 0.5;
  double learning_rate = 1e-4;
  std::size_t epochs = 200;
  std::size_t batch_size = 24;
  std::uint64_t seed = 0;
  double bn_momentum = 0.9;
  double bn_epsilon = 1e-5;

  std::array<std::size_t, 2> hidden_widths() const { return {4 * n_classes, 2 * n_classes}; }
  NetShape shape() const {
    return {static_cast<Eigen::Index>(input_dim), static_cast<Eigen::Index>(n_classes)};
  }
  /// Throws InvalidConfig.
  void validate() const;

  bool operator==(const ModelConfig&) const = default;
};

/// A trained classifier plus everything needed to run it on raw orders.
struct MlpModel {
  ModelConfig config;
  Mlp<float> net;
  Vocabulary vocabulary;
  std::vector<std::string> labels;  // output index i scores labels[i]
  Level level = Level::Local;
};

struct TrainHistory {
  std::vector<double> epoch_loss;     // mean batch loss
  std::vector<double> epoch_seconds;
  std::size_t epochs_run = 0;
};

struct TrainResult {
  MlpModel model;
  TrainHistory history;
};

MlpModel init_model(const ModelConfig& config);

/// Called after each epoch with (epoch index, mean loss).
using EpochCallback = std::function<void(std::size_t, double)>;

/// Shuffled mini-batch Adam training. Batches shorter than 2 are skipped.
/// Deterministic in `config.seed`: shuffles and dropout masks derive from it.
TrainResult train(const std::vector<FeatureVector>& features, const std::vector<std::size_t>& labels,
                  const ModelConfig& config, const EpochCallback& on_epoch = {});

/// Builds the vocabulary from `train_orders`, encodes, and trains against `label_space`.
/// `config.input_dim` and `config.n_classes` are filled in.
TrainResult train_on_orders(const std::vector<Order>& train_orders, const std::vector<std::string>& label_space,
                            ModelConfig config, Level level = Level::Local, const EpochCallback& on_epoch = {});

/// Label index of every order in `label_space`; throws UnknownLabel.
std::vector<std::size_t> label_indices(const std::vector<Order>& orders, const std::vector<std::string>& label_space);

/// Inference logits, one row per feature vector.
Matrix<float> infer_logits(const MlpModel& model, const std::vector<FeatureVector>& features);

/// Logits for a single order through the full text pipeline.
RowVector<float> infer_order(const MlpModel& model, const Order& order, EncodingEcho* echo = nullptr);

}  // namespace protocolnet
