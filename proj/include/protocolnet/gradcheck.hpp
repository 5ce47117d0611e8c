#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "protocolnet/model.hpp"

namespace protocolnet {

struct TensorCheck {
  std::string name;
  double max_relative_error = 0.0;
  double max_abs_error = 0.0;
  bool passed = true;
};

struct GradientCheckReport {
  std::vector<TensorCheck> tensors;
  double max_relative_error = 0.0;
  double tolerance = 0.0;
  bool passed = true;
};

/// Analytic gradient under test; the default is loss_and_grad with dropout off.
using AnalyticGradient =
    std::function<MlpParameters<double>(Mlp<double>&, const Matrix<double>&, const std::vector<std::size_t>&)>;

struct GradientCheckOptions {
  double step = 1e-6;
  /// Relative error is |a - f| / max(|a|, |f|, floor). The floor keeps parameters whose
  /// true gradient is zero (e.g. dense biases feeding batch norm) from dividing rounding noise by ~0.
  double denominator_floor = 1e-3;
};

/// Central finite differences in double precision against analytic gradients, per tensor.
/// The network is built from `config` (seeded); dropout is disabled.
GradientCheckReport gradient_check(const ModelConfig& config, const Matrix<double>& batch,
                                   const std::vector<std::size_t>& labels, double tolerance,
                                   const GradientCheckOptions& options = {}, const AnalyticGradient& analytic = {});

/// Random binary batch and labels for a fresh model of the given size.
GradientCheckReport random_gradient_check(std::size_t input_dim, std::size_t n_classes, std::size_t batch_size,
                                          std::uint64_t seed, double tolerance);

}  // namespace protocolnet
