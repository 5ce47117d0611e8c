#include "protocolnet/model.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>
#include <unordered_map>

namespace protocolnet {

void ModelConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error(Errc::InvalidConfig, what); };
  if (input_dim == 0) fail("input_dim must be positive");
  if (n_classes == 0) fail("n_classes must be positive");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) fail("dropout_rate must lie in [0, 1)");
  if (!(learning_rate > 0.0)) fail("learning_rate must be positive");
  if (batch_size == 0) fail("batch_size must be positive");
  if (!(bn_momentum > 0.0 && bn_momentum < 1.0)) fail("bn_momentum must lie in (0, 1)");
  if (!(bn_epsilon > 0.0)) fail("bn_epsilon must be positive");
}

MlpModel init_model(const ModelConfig& config) {
  config.validate();
  MlpModel model;
  model.config = config;
  model.net = init_network<float>(config.shape(), config.seed, config.bn_momentum, config.bn_epsilon);
  return model;
}

TrainResult train(const std::vector<FeatureVector>& features, const std::vector<std::size_t>& labels,
                  const ModelConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  if (features.size() != labels.size()) throw Error(Errc::ShapeMismatch, "feature and label counts differ");
  if (features.size() < 2) throw Error(Errc::EmptyDataset, "training needs at least 2 examples");
  for (const auto& f : features) {
    if (f.dimension != config.input_dim) throw Error(Errc::ShapeMismatch, "feature dimension differs from input_dim");
  }

  TrainResult result{init_model(config), {}};
  auto& net = result.model.net;
  // Initialization consumes config.seed directly; the training stream is offset so it is not the same sequence.
  std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  auto state = AdamState<float>::fresh(net.shape);
  const AdamSettings adam{config.learning_rate};

  std::vector<std::size_t> order(features.size());
  std::iota(order.begin(), order.end(), 0);
  std::int64_t step = 0;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
      const auto end = std::min(order.size(), begin + config.batch_size);
      const std::uint64_t dropout_seed = rng();
      if (end - begin < 2) continue;
      std::vector<std::size_t> rows(order.begin() + static_cast<std::ptrdiff_t>(begin),
                                    order.begin() + static_cast<std::ptrdiff_t>(end));
      std::vector<std::size_t> batch_labels;
      batch_labels.reserve(rows.size());
      for (auto r : rows) batch_labels.push_back(labels[r]);
      const auto batch = stack_features<float>(features, rows);

      auto [loss, grad] = loss_and_grad(net, batch, batch_labels, config.dropout_rate, dropout_seed);
      adam_step(state, net.params, grad, ++step, adam);
      loss_sum += loss;
      ++batches;
    }
    const double mean_loss = batches ? loss_sum / static_cast<double>(batches) : 0.0;
    result.history.epoch_loss.push_back(mean_loss);
    result.history.epoch_seconds.push_back(
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
    result.history.epochs_run = epoch + 1;
    if (on_epoch) on_epoch(epoch, mean_loss);
  }
  return result;
}

std::vector<std::size_t> label_indices(const std::vector<Order>& orders, const std::vector<std::string>& label_space) {
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < label_space.size(); ++i) index.emplace(label_space[i], i);
  std::vector<std::size_t> out;
  out.reserve(orders.size());
  for (const auto& o : orders) {
    auto it = index.find(o.protocol);
    if (it == index.end()) throw Error(Errc::UnknownLabel, "order " + o.id + " has unknown protocol '" + o.protocol + "'");
    out.push_back(it->second);
  }
  return out;
}

TrainResult train_on_orders(const std::vector<Order>& train_orders, const std::vector<std::string>& label_space,
                            ModelConfig config, Level level, const EpochCallback& on_epoch) {
  auto vocab = build_vocabulary(train_orders);
  const auto features = encode_orders(train_orders, vocab);
  const auto labels = label_indices(train_orders, label_space);
  config.input_dim = vocab.dimension();
  config.n_classes = label_space.size();
  auto result = train(features, labels, config, on_epoch);
  result.model.vocabulary = std::move(vocab);
  result.model.labels = label_space;
  result.model.level = level;
  return result;
}

Matrix<float> infer_logits(const MlpModel& model, const std::vector<FeatureVector>& features) {
  std::vector<std::size_t> rows(features.size());
  std::iota(rows.begin(), rows.end(), 0);
  if (features.empty()) return Matrix<float>(0, model.net.shape.n_classes);
  return infer(model.net, stack_features<float>(features, rows));
}

RowVector<float> infer_order(const MlpModel& model, const Order& order, EncodingEcho* echo) {
  const auto fv = encode_order(order, model.vocabulary, StopwordList::english(), echo);
  return infer(model.net, Matrix<float>(fv.dense<float>())).row(0);
}

}  // namespace protocolnet
