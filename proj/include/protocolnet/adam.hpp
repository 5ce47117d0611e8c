#pragma once

#include <cmath>
#include <cstdint>

#include "protocolnet/mlp.hpp"

namespace protocolnet {

struct AdamSettings {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

template <typename Scalar>
struct AdamState {
  MlpParameters<Scalar> first_moment;
  MlpParameters<Scalar> second_moment;

  static AdamState fresh(const NetShape& shape) {
    return {MlpParameters<Scalar>::zeros(shape), MlpParameters<Scalar>::zeros(shape)};
  }
};

/// One bias-corrected Adam update. `step_index` counts from 1.
template <typename Scalar>
void adam_step(AdamState<Scalar>& state, MlpParameters<Scalar>& params, const MlpParameters<Scalar>& grads,
               std::int64_t step_index, const AdamSettings& settings) {
  auto p = params.tensors();
  auto g = grads.tensors();
  auto m = state.first_moment.tensors();
  auto v = state.second_moment.tensors();
  for (std::size_t t = 0; t < p.size(); ++t) {
    if (g[t].size() != p[t].size() || m[t].size() != p[t].size() || v[t].size() != p[t].size()) {
      throw Error(Errc::ShapeMismatch, "optimizer state does not match parameter tensor " + std::to_string(t));
    }
  }
  if (step_index < 1) throw Error(Errc::InvalidConfig, "Adam step index starts at 1");

  const auto b1 = static_cast<Scalar>(settings.beta1);
  const auto b2 = static_cast<Scalar>(settings.beta2);
  const double t = static_cast<double>(step_index);
  const auto correction1 = static_cast<Scalar>(1.0 - std::pow(settings.beta1, t));
  const auto correction2 = static_cast<Scalar>(1.0 - std::pow(settings.beta2, t));
  const auto lr = static_cast<Scalar>(settings.learning_rate);
  const auto eps = static_cast<Scalar>(settings.epsilon);

  for (std::size_t t_idx = 0; t_idx < p.size(); ++t_idx) {
    for (std::size_t i = 0; i < p[t_idx].size(); ++i) {
      const Scalar gi = g[t_idx][i];
      m[t_idx][i] = b1 * m[t_idx][i] + (Scalar(1) - b1) * gi;
      v[t_idx][i] = b2 * v[t_idx][i] + (Scalar(1) - b2) * gi * gi;
      const Scalar m_hat = m[t_idx][i] / correction1;
      const Scalar v_hat = v[t_idx][i] / correction2;
      p[t_idx][i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
    }
  }
}

}  // namespace protocolnet
