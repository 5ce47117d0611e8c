#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "protocolnet/error.hpp"

namespace protocolnet {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

enum class Mode { Train, Infer };

/// Layer widths of the classifier: input -> 4n -> 2n -> n.
struct NetShape {
  Eigen::Index input_dim = 0;
  Eigen::Index n_classes = 0;

  std::array<Eigen::Index, 4> widths() const { return {input_dim, 4 * n_classes, 2 * n_classes, n_classes}; }
  bool operator==(const NetShape&) const = default;
};

inline constexpr int kDenseLayers = 3;
inline constexpr int kNormLayers = 2;

/// Trainable tensors. Also used as the gradient and Adam moment container.
template <typename Scalar>
struct MlpParameters {
  std::array<Matrix<Scalar>, kDenseLayers> weight;  // fan_in x fan_out
  std::array<RowVector<Scalar>, kDenseLayers> bias;
  std::array<RowVector<Scalar>, kNormLayers> bn_scale;
  std::array<RowVector<Scalar>, kNormLayers> bn_shift;

  static MlpParameters zeros(const NetShape& shape) {
    const auto w = shape.widths();
    MlpParameters p;
    for (int l = 0; l < kDenseLayers; ++l) {
      p.weight[l] = Matrix<Scalar>::Zero(w[l], w[l + 1]);
      p.bias[l] = RowVector<Scalar>::Zero(w[l + 1]);
    }
    for (int l = 0; l < kNormLayers; ++l) {
      p.bn_scale[l] = RowVector<Scalar>::Zero(w[l + 1]);
      p.bn_shift[l] = RowVector<Scalar>::Zero(w[l + 1]);
    }
    return p;
  }

  /// Flat views in declared order: dense0.weight, dense0.bias, bn0.scale, bn0.shift, dense1..., dense2.weight, dense2.bias.
  std::vector<std::span<Scalar>> tensors() {
    std::vector<std::span<Scalar>> out;
    for (int l = 0; l < kDenseLayers; ++l) {
      out.emplace_back(weight[l].data(), static_cast<std::size_t>(weight[l].size()));
      out.emplace_back(bias[l].data(), static_cast<std::size_t>(bias[l].size()));
      if (l < kNormLayers) {
        out.emplace_back(bn_scale[l].data(), static_cast<std::size_t>(bn_scale[l].size()));
        out.emplace_back(bn_shift[l].data(), static_cast<std::size_t>(bn_shift[l].size()));
      }
    }
    return out;
  }

  std::vector<std::span<const Scalar>> tensors() const {
    std::vector<std::span<const Scalar>> out;
    for (auto s : const_cast<MlpParameters*>(this)->tensors()) out.emplace_back(s.data(), s.size());
    return out;
  }

  static std::vector<std::string> tensor_names() {
    std::vector<std::string> names;
    for (int l = 0; l < kDenseLayers; ++l) {
      names.push_back("dense" + std::to_string(l) + ".weight");
      names.push_back("dense" + std::to_string(l) + ".bias");
      if (l < kNormLayers) {
        names.push_back("bn" + std::to_string(l) + ".scale");
        names.push_back("bn" + std::to_string(l) + ".shift");
      }
    }
    return names;
  }

  template <typename Other>
  MlpParameters<Other> cast() const {
    MlpParameters<Other> out;
    for (int l = 0; l < kDenseLayers; ++l) {
      out.weight[l] = weight[l].template cast<Other>();
      out.bias[l] = bias[l].template cast<Other>();
    }
    for (int l = 0; l < kNormLayers; ++l) {
      out.bn_scale[l] = bn_scale[l].template cast<Other>();
      out.bn_shift[l] = bn_shift[l].template cast<Other>();
    }
    return out;
  }
};

/// Batch-norm running statistics (not trainable).
template <typename Scalar>
struct RunningStats {
  std::array<RowVector<Scalar>, kNormLayers> mean;
  std::array<RowVector<Scalar>, kNormLayers> var;
};

template <typename Scalar>
struct Mlp {
  NetShape shape;
  MlpParameters<Scalar> params;
  RunningStats<Scalar> stats;
  /// running <- momentum * running + (1 - momentum) * batch
  Scalar bn_momentum = Scalar(0.9);
  Scalar bn_epsilon = Scalar(1e-5);

  template <typename Other>
  Mlp<Other> cast() const {
    Mlp<Other> out;
    out.shape = shape;
    out.params = params.template cast<Other>();
    for (int l = 0; l < kNormLayers; ++l) {
      out.stats.mean[l] = stats.mean[l].template cast<Other>();
      out.stats.var[l] = stats.var[l].template cast<Other>();
    }
    out.bn_momentum = static_cast<Other>(bn_momentum);
    out.bn_epsilon = static_cast<Other>(bn_epsilon);
    return out;
  }

  /// Throws ShapeMismatch unless every tensor agrees with `shape`.
  void check_shapes() const {
    const auto w = shape.widths();
    auto fail = [](const std::string& what) { throw Error(Errc::ShapeMismatch, what); };
    for (int l = 0; l < kDenseLayers; ++l) {
      if (params.weight[l].rows() != w[l] || params.weight[l].cols() != w[l + 1]) {
        fail("dense" + std::to_string(l) + ".weight shape");
      }
      if (params.bias[l].size() != w[l + 1]) fail("dense" + std::to_string(l) + ".bias shape");
    }
    for (int l = 0; l < kNormLayers; ++l) {
      for (const auto* v : {&params.bn_scale[l], &params.bn_shift[l], &stats.mean[l], &stats.var[l]}) {
        if (v->size() != w[l + 1]) fail("bn" + std::to_string(l) + " shape");
      }
      if ((stats.var[l].array() < Scalar(0)).any()) fail("bn" + std::to_string(l) + " negative running variance");
    }
    if (!(bn_epsilon > Scalar(0))) fail("batch-norm epsilon must be positive");
  }
};

/// He-normal weights (variance 2 / fan_in), zero biases, identity batch norm.
/// Draws are made in double and cast, so float and double networks from one seed agree up to rounding.
template <typename Scalar>
Mlp<Scalar> init_network(const NetShape& shape, std::uint64_t seed, double bn_momentum = 0.9,
                         double bn_epsilon = 1e-5) {
  if (shape.input_dim <= 0 || shape.n_classes <= 0) throw Error(Errc::InvalidConfig, "non-positive layer dimension");
  std::mt19937_64 rng(seed);
  Mlp<Scalar> net;
  net.shape = shape;
  net.params = MlpParameters<Scalar>::zeros(shape);
  const auto w = shape.widths();
  for (int l = 0; l < kDenseLayers; ++l) {
    std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / static_cast<double>(w[l])));
    auto& weight = net.params.weight[l];
    for (Eigen::Index i = 0; i < weight.size(); ++i) weight.data()[i] = static_cast<Scalar>(normal(rng));
  }
  for (int l = 0; l < kNormLayers; ++l) {
    net.params.bn_scale[l].setOnes();
    net.stats.mean[l] = RowVector<Scalar>::Zero(w[l + 1]);
    net.stats.var[l] = RowVector<Scalar>::Ones(w[l + 1]);
  }
  net.bn_momentum = static_cast<Scalar>(bn_momentum);
  net.bn_epsilon = static_cast<Scalar>(bn_epsilon);
  return net;
}

/// Intermediates kept by a train-mode forward pass for backpropagation.
template <typename Scalar>
struct ForwardCache {
  std::array<Matrix<Scalar>, kDenseLayers> input;         // input to each dense layer
  std::array<Matrix<Scalar>, kNormLayers> normalized;     // x_hat, before scale/shift
  std::array<RowVector<Scalar>, kNormLayers> inv_std;
  std::array<Matrix<Scalar>, kNormLayers> activated;      // after scale/shift, before ReLU
  std::array<Matrix<Scalar>, kNormLayers> dropout_mask;   // 0 or 1/(1-p)
};

namespace detail {

inline void check_batch(Eigen::Index cols, const NetShape& shape) {
  if (cols != shape.input_dim) {
    throw Error(Errc::ShapeMismatch, "batch has " + std::to_string(cols) + " features, model expects " +
                                         std::to_string(shape.input_dim));
  }
}

}  // namespace detail

/// Train-mode forward: batch statistics, running-stat update, inverted dropout.
/// Returns logits (batch x n_classes) and fills `cache`.
template <typename Scalar>
Matrix<Scalar> forward_train(Mlp<Scalar>& net, const Matrix<Scalar>& batch, double dropout_rate,
                             std::uint64_t dropout_seed, ForwardCache<Scalar>& cache) {
  detail::check_batch(batch.cols(), net.shape);
  if (batch.rows() < 2) throw Error(Errc::BatchTooSmall, "train mode needs at least 2 examples for batch statistics");
  const auto n = static_cast<Scalar>(batch.rows());
  const Scalar keep_scale = static_cast<Scalar>(1.0 / (1.0 - dropout_rate));
  std::mt19937_64 rng(dropout_seed);
  std::bernoulli_distribution keep(1.0 - dropout_rate);

  Matrix<Scalar> a = batch;
  for (int l = 0; l < kNormLayers; ++l) {
    cache.input[l] = a;
    Matrix<Scalar> z = (a * net.params.weight[l]).rowwise() + net.params.bias[l];

    const RowVector<Scalar> mean = z.colwise().sum() / n;
    Matrix<Scalar> centered = z.rowwise() - mean;
    const RowVector<Scalar> var = centered.array().square().colwise().sum() / n;
    cache.inv_std[l] = (var.array() + net.bn_epsilon).rsqrt().matrix();
    cache.normalized[l] = (centered.array().rowwise() * cache.inv_std[l].array()).matrix();
    cache.activated[l] = ((cache.normalized[l].array().rowwise() * net.params.bn_scale[l].array()).rowwise() +
                          net.params.bn_shift[l].array())
                             .matrix();

    const Scalar m = net.bn_momentum;
    net.stats.mean[l] = m * net.stats.mean[l] + (Scalar(1) - m) * mean;
    net.stats.var[l] = m * net.stats.var[l] + (Scalar(1) - m) * var;

    auto& mask = cache.dropout_mask[l];
    mask.resize(z.rows(), z.cols());
    if (dropout_rate <= 0.0) {
      mask.setOnes();
    } else {
      for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = keep(rng) ? keep_scale : Scalar(0);
    }
    a = (cache.activated[l].array().max(Scalar(0)) * mask.array()).matrix();
  }
  cache.input[kDenseLayers - 1] = a;
  return (a * net.params.weight[kDenseLayers - 1]).rowwise() + net.params.bias[kDenseLayers - 1];
}

/// Inference: running statistics, no dropout. Pure in (net, batch).
template <typename Scalar>
Matrix<Scalar> infer(const Mlp<Scalar>& net, const Matrix<Scalar>& batch) {
  detail::check_batch(batch.cols(), net.shape);
  Matrix<Scalar> a = batch;
  for (int l = 0; l < kNormLayers; ++l) {
    Matrix<Scalar> z = (a * net.params.weight[l]).rowwise() + net.params.bias[l];
    const RowVector<Scalar> inv_std = (net.stats.var[l].array() + net.bn_epsilon).rsqrt().matrix();
    const RowVector<Scalar> scale = (inv_std.array() * net.params.bn_scale[l].array()).matrix();
    const RowVector<Scalar> shift =
        (net.params.bn_shift[l].array() - net.stats.mean[l].array() * scale.array()).matrix();
    a = ((z.array().rowwise() * scale.array()).rowwise() + shift.array()).max(Scalar(0)).matrix();
  }
  return (a * net.params.weight[kDenseLayers - 1]).rowwise() + net.params.bias[kDenseLayers - 1];
}

/// Mean softmax cross-entropy with log-sum-exp stabilization.
/// Writes d(loss)/d(logits) into `dlogits` when non-null.
template <typename Scalar>
Scalar softmax_cross_entropy(const Matrix<Scalar>& logits, const std::vector<std::size_t>& labels,
                             Matrix<Scalar>* dlogits = nullptr) {
  if (static_cast<Eigen::Index>(labels.size()) != logits.rows()) {
    throw Error(Errc::ShapeMismatch, "label count does not match batch size");
  }
  const auto n_classes = static_cast<std::size_t>(logits.cols());
  for (auto y : labels) {
    if (y >= n_classes) throw Error(Errc::LabelOutOfRange, "label " + std::to_string(y) + " >= n_classes");
  }
  const auto rows = logits.rows();
  Scalar total = 0;
  if (dlogits) dlogits->resize(rows, logits.cols());
  for (Eigen::Index i = 0; i < rows; ++i) {
    const Scalar max = logits.row(i).maxCoeff();
    const auto shifted = (logits.row(i).array() - max).eval();
    const Scalar lse = std::log(shifted.exp().sum());
    const auto y = static_cast<Eigen::Index>(labels[static_cast<std::size_t>(i)]);
    total += lse - shifted(y);
    if (dlogits) {
      dlogits->row(i) = (shifted - lse).exp().matrix();
      (*dlogits)(i, y) -= Scalar(1);
    }
  }
  if (dlogits) *dlogits /= static_cast<Scalar>(rows);
  return total / static_cast<Scalar>(rows);
}

/// Backpropagate d(loss)/d(logits) through a cached train-mode pass.
template <typename Scalar>
MlpParameters<Scalar> backward(const Mlp<Scalar>& net, const ForwardCache<Scalar>& cache,
                               const Matrix<Scalar>& dlogits) {
  MlpParameters<Scalar> grad;
  constexpr int last = kDenseLayers - 1;
  grad.weight[last] = cache.input[last].transpose() * dlogits;
  grad.bias[last] = dlogits.colwise().sum();
  Matrix<Scalar> da = dlogits * net.params.weight[last].transpose();

  const auto n = static_cast<Scalar>(dlogits.rows());
  for (int l = kNormLayers - 1; l >= 0; --l) {
    // dropout, then ReLU
    Matrix<Scalar> dy =
        (da.array() * cache.dropout_mask[l].array() * (cache.activated[l].array() > Scalar(0)).template cast<Scalar>())
            .matrix();
    const auto& xhat = cache.normalized[l];
    grad.bn_scale[l] = (dy.array() * xhat.array()).colwise().sum().matrix();
    grad.bn_shift[l] = dy.colwise().sum();

    const Matrix<Scalar> dxhat = (dy.array().rowwise() * net.params.bn_scale[l].array()).matrix();
    const RowVector<Scalar> sum_dxhat = dxhat.colwise().sum();
    const RowVector<Scalar> sum_dxhat_xhat = (dxhat.array() * xhat.array()).colwise().sum().matrix();
    Matrix<Scalar> dz = ((n * dxhat.array()).rowwise() - sum_dxhat.array() -
                         (xhat.array().rowwise() * sum_dxhat_xhat.array()))
                            .matrix();
    dz = (dz.array().rowwise() * (cache.inv_std[l].array() / n)).matrix();

    grad.weight[l] = cache.input[l].transpose() * dz;
    grad.bias[l] = dz.colwise().sum();
    if (l > 0) da = dz * net.params.weight[l].transpose();
  }
  return grad;
}

template <typename Scalar>
struct LossAndGrad {
  Scalar loss;
  MlpParameters<Scalar> grad;
};

/// Train-mode forward, cross-entropy, full backward pass.
template <typename Scalar>
LossAndGrad<Scalar> loss_and_grad(Mlp<Scalar>& net, const Matrix<Scalar>& batch, const std::vector<std::size_t>& labels,
                                  double dropout_rate, std::uint64_t dropout_seed) {
  if (static_cast<Eigen::Index>(labels.size()) != batch.rows()) {
    throw Error(Errc::ShapeMismatch, "label count does not match batch size");
  }
  for (auto y : labels) {
    if (y >= static_cast<std::size_t>(net.shape.n_classes)) {
      throw Error(Errc::LabelOutOfRange, "label " + std::to_string(y) + " >= n_classes");
    }
  }
  ForwardCache<Scalar> cache;
  const Matrix<Scalar> logits = forward_train(net, batch, dropout_rate, dropout_seed, cache);
  Matrix<Scalar> dlogits;
  const Scalar loss = softmax_cross_entropy(logits, labels, &dlogits);
  return {loss, backward(net, cache, dlogits)};
}

}  // namespace protocolnet
