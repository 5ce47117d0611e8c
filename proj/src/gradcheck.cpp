#include "protocolnet/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace protocolnet {

namespace {

double batch_loss(Mlp<double> net, const Matrix<double>& batch, const std::vector<std::size_t>& labels) {
  ForwardCache<double> cache;
  return softmax_cross_entropy(forward_train(net, batch, 0.0, 0, cache), labels);
}

}  // namespace

GradientCheckReport gradient_check(const ModelConfig& config, const Matrix<double>& batch,
                                   const std::vector<std::size_t>& labels, double tolerance,
                                   const GradientCheckOptions& options, const AnalyticGradient& analytic) {
  config.validate();
  auto net = init_network<double>(config.shape(), config.seed, config.bn_momentum, config.bn_epsilon);

  MlpParameters<double> grad;
  {
    auto scratch = net;
    grad = analytic ? analytic(scratch, batch, labels) : loss_and_grad(scratch, batch, labels, 0.0, 0).grad;
  }

  GradientCheckReport report;
  report.tolerance = tolerance;
  const auto names = MlpParameters<double>::tensor_names();
  auto params = net.params.tensors();
  const auto analytic_tensors = grad.tensors();
  if (analytic_tensors.size() != params.size()) throw Error(Errc::ShapeMismatch, "gradient tensor count");

  for (std::size_t t = 0; t < params.size(); ++t) {
    TensorCheck check{names[t]};
    if (analytic_tensors[t].size() != params[t].size()) throw Error(Errc::ShapeMismatch, "gradient shape " + names[t]);
    for (std::size_t i = 0; i < params[t].size(); ++i) {
      const double original = params[t][i];
      params[t][i] = original + options.step;
      const double plus = batch_loss(net, batch, labels);
      params[t][i] = original - options.step;
      const double minus = batch_loss(net, batch, labels);
      params[t][i] = original;

      const double numeric = (plus - minus) / (2.0 * options.step);
      const double a = analytic_tensors[t][i];
      const double abs_err = std::abs(a - numeric);
      const double rel_err = abs_err / std::max({std::abs(a), std::abs(numeric), options.denominator_floor});
      check.max_abs_error = std::max(check.max_abs_error, abs_err);
      check.max_relative_error = std::max(check.max_relative_error, rel_err);
    }
    check.passed = check.max_relative_error < tolerance;
    report.passed = report.passed && check.passed;
    report.max_relative_error = std::max(report.max_relative_error, check.max_relative_error);
    report.tensors.push_back(std::move(check));
  }
  return report;
}

GradientCheckReport random_gradient_check(std::size_t input_dim, std::size_t n_classes, std::size_t batch_size,
                                          std::uint64_t seed, double tolerance) {
  ModelConfig config;
  config.input_dim = input_dim;
  config.n_classes = n_classes;
  config.dropout_rate = 0.0;
  config.seed = seed;

  std::mt19937_64 rng(seed + 1);
  std::bernoulli_distribution bit(0.3);
  std::uniform_int_distribution<std::size_t> label(0, n_classes - 1);
  Matrix<double> batch(static_cast<Eigen::Index>(batch_size), static_cast<Eigen::Index>(input_dim));
  for (Eigen::Index i = 0; i < batch.size(); ++i) batch.data()[i] = bit(rng) ? 1.0 : 0.0;
  std::vector<std::size_t> labels(batch_size);
  for (auto& y : labels) y = label(rng);
  return gradient_check(config, batch, labels, tolerance);
}

}  // namespace protocolnet
