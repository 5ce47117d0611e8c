#include <doctest.h>

#include <random>

#include "protocolnet/model.hpp"

using namespace protocolnet;

namespace {

// Three classes, each owning a disjoint block of features plus shared noise.
struct Separable {
  std::vector<FeatureVector> features;
  std::vector<std::size_t> labels;
};

Separable separable(std::size_t per_class, std::uint64_t seed) {
  constexpr std::size_t dim = 30;
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution noise(0.1);
  Separable s;
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t i = 0; i < per_class; ++i) {
      FeatureVector f;
      f.dimension = dim;
      for (std::uint32_t j = 0; j < dim; ++j) {
        const bool own = j / 5 == c;
        if (own || (j >= 15 && noise(rng))) f.active.push_back(j);
      }
      s.features.push_back(std::move(f));
      s.labels.push_back(c);
    }
  }
  return s;
}

ModelConfig config_for(std::size_t epochs, std::uint64_t seed) {
  ModelConfig c;
  c.input_dim = 30;
  c.n_classes = 3;
  c.epochs = epochs;
  c.batch_size = 8;
  c.learning_rate = 1e-2;
  c.seed = seed;
  return c;
}

double train_accuracy(const MlpModel& model, const Separable& s) {
  const auto logits = infer_logits(model, s.features);
  std::size_t hits = 0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    Eigen::Index arg = 0;
    logits.row(i).maxCoeff(&arg);
    hits += static_cast<std::size_t>(arg) == s.labels[static_cast<std::size_t>(i)];
  }
  return static_cast<double>(hits) / static_cast<double>(logits.rows());
}

}  // namespace

TEST_CASE("zero epochs returns the initial model") {
  const auto data = separable(10, 1);
  const auto config = config_for(0, 3);
  const auto result = train(data.features, data.labels, config);
  const auto fresh = init_model(config);
  CHECK(result.history.epochs_run == 0);
  CHECK(result.history.epoch_loss.empty());
  const auto a = result.model.net.params.tensors();
  const auto b = fresh.net.params.tensors();
  for (std::size_t t = 0; t < a.size(); ++t) CHECK(std::equal(a[t].begin(), a[t].end(), b[t].begin()));
}

TEST_CASE("separable data is fit perfectly") {
  const auto data = separable(20, 2);
  std::size_t callbacks = 0;
  const auto result = train(data.features, data.labels, config_for(60, 4), [&](std::size_t, double) { ++callbacks; });
  CHECK(callbacks == 60);
  CHECK(result.history.epochs_run == 60);
  CHECK(result.history.epoch_loss.back() < result.history.epoch_loss.front());
  CHECK(train_accuracy(result.model, data) == 1.0);
}

TEST_CASE("training is deterministic in the seed") {
  const auto data = separable(12, 5);
  const auto a = train(data.features, data.labels, config_for(5, 9));
  const auto b = train(data.features, data.labels, config_for(5, 9));
  const auto c = train(data.features, data.labels, config_for(5, 10));
  CHECK(a.history.epoch_loss == b.history.epoch_loss);
  const auto ta = a.model.net.params.tensors();
  const auto tb = b.model.net.params.tensors();
  const auto tc = c.model.net.params.tensors();
  bool differs = false;
  for (std::size_t t = 0; t < ta.size(); ++t) {
    CHECK(std::equal(ta[t].begin(), ta[t].end(), tb[t].begin()));
    differs |= !std::equal(ta[t].begin(), ta[t].end(), tc[t].begin());
  }
  CHECK(differs);
  CHECK(a.model.net.stats.mean[0] == b.model.net.stats.mean[0]);
}

TEST_CASE("training errors") {
  auto data = separable(1, 1);
  data.features.resize(1);
  data.labels.resize(1);
  try {
    train(data.features, data.labels, config_for(1, 1));
    FAIL("expected EmptyDataset");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::EmptyDataset);
  }
  const auto ok = separable(3, 1);
  auto labels = ok.labels;
  labels[0] = 7;
  CHECK_THROWS_AS(train(ok.features, labels, config_for(1, 1)), Error);
}

TEST_CASE("train_on_orders wires vocabulary and labels") {
  std::vector<Order> orders;
  for (int i = 0; i < 12; ++i) {
    orders.push_back({"o" + std::to_string(i), i % 2 ? "knee pain" : "headache", i % 2 ? "meniscus" : "migraine",
                      i % 2 ? "knee" : "brain"});
  }
  ModelConfig config;
  config.epochs = 40;
  config.batch_size = 4;
  config.learning_rate = 1e-2;
  const std::vector<std::string> labels = {"brain", "knee", "spine"};
  const auto result = train_on_orders(orders, labels, config, Level::Acr);
  CHECK(result.model.config.n_classes == 3);
  CHECK(result.model.config.input_dim == result.model.vocabulary.dimension());
  CHECK(result.model.labels == labels);
  CHECK(result.model.level == Level::Acr);
  EncodingEcho echo;
  const auto logits = infer_order(result.model, {"x", "knee pain zebra", "meniscus", ""}, &echo);
  Eigen::Index arg = 0;
  logits.maxCoeff(&arg);
  CHECK(arg == 1);
  CHECK(echo.indication_dropped == std::vector<std::string>{"zebra"});
  CHECK_THROWS_AS(label_indices(orders, {"brain"}), Error);
}
