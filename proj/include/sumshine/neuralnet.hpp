// Copyright (c) 2026, The Sumshine Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "sumshine/binary_io.hpp"
#include "sumshine/embedding_store.hpp"
#include "sumshine/error.hpp"
#include "sumshine/rng.hpp"

namespace sumshine {

/// input -> hidden... -> output; ReLU on hidden layers, softmax on the output.
struct MlpSpec {
  std::vector<std::size_t> layer_dims;
  std::uint64_t seed = 0;

  void validate() const {
    if (layer_dims.size() < 3) throw ConfigError("MLP needs input, at least one hidden layer and output");
    for (auto d : layer_dims)
      if (d < 1) throw ConfigError("MLP layer dimensions must be >= 1");
  }
};

template <typename Real>
using Matrix = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Real>
struct DenseLayer {
  Matrix<Real> weight;  // out x in
  Vector<Real> bias;
  Matrix<Real> weight_accum;
  Vector<Real> bias_accum;
};

template <typename Real>
class BasicMlp {
 public:
  BasicMlp() = default;

  /// Weights ~ U[-sqrt(6/(fan_in+fan_out)), +...], biases zero.
  explicit BasicMlp(const MlpSpec& spec) : spec_(spec) {
    spec.validate();
    Rng rng = make_rng(spec.seed, {0x6d6c70});
    for (std::size_t l = 0; l + 1 < spec.layer_dims.size(); ++l) {
      const auto in = static_cast<Eigen::Index>(spec.layer_dims[l]);
      const auto out = static_cast<Eigen::Index>(spec.layer_dims[l + 1]);
      const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
      std::uniform_real_distribution<double> u(-bound, bound);
      DenseLayer<Real> layer;
      layer.weight.resize(out, in);
      for (Eigen::Index i = 0; i < layer.weight.size(); ++i) layer.weight.data()[i] = static_cast<Real>(u(rng));
      layer.bias = Vector<Real>::Zero(out);
      layer.weight_accum = Matrix<Real>::Zero(out, in);
      layer.bias_accum = Vector<Real>::Zero(out);
      layers_.push_back(std::move(layer));
    }
  }

  const MlpSpec& spec() const noexcept { return spec_; }
  std::size_t input_dim() const { return spec_.layer_dims.front(); }
  std::size_t output_dim() const { return spec_.layer_dims.back(); }
  std::vector<DenseLayer<Real>>& layers() noexcept { return layers_; }
  const std::vector<DenseLayer<Real>>& layers() const noexcept { return layers_; }

  bool all_finite() const {
    for (const auto& l : layers_)
      if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
    return true;
  }

  friend bool operator==(const BasicMlp& a, const BasicMlp& b) {
    if (a.spec_.layer_dims != b.spec_.layer_dims || a.layers_.size() != b.layers_.size()) return false;
    for (std::size_t i = 0; i < a.layers_.size(); ++i) {
      const auto& x = a.layers_[i];
      const auto& y = b.layers_[i];
      if (x.weight != y.weight || x.bias != y.bias || x.weight_accum != y.weight_accum ||
          x.bias_accum != y.bias_accum)
        return false;
    }
    return true;
  }

 private:
  MlpSpec spec_;
  std::vector<DenseLayer<Real>> layers_;
};

using Mlp = BasicMlp<float>;

template <typename Real>
struct MlpGradients {
  double loss = 0.0;
  std::vector<Matrix<Real>> weight;
  std::vector<Vector<Real>> bias;
  Matrix<Real> input;
};

namespace detail {

template <typename Real>
void check_width(const BasicMlp<Real>& mlp, Eigen::Index cols) {
  if (static_cast<std::size_t>(cols) != mlp.input_dim())
    throw ShapeError("MLP input width " + std::to_string(cols) + " does not match " +
                     std::to_string(mlp.input_dim()));
}

/// Row-wise log-softmax.
template <typename Real>
Matrix<Real> log_softmax(const Matrix<Real>& z) {
  Matrix<Real> out = z;
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const Real m = z.row(i).maxCoeff();
    const Real lse = m + std::log((z.row(i).array() - m).exp().sum());
    out.row(i).array() -= lse;
  }
  return out;
}

/// Forward pass keeping every layer's activation (activations[0] = input).
template <typename Real, typename Derived>
Matrix<Real> forward_logits(const BasicMlp<Real>& mlp, const Eigen::MatrixBase<Derived>& inputs,
                            std::vector<Matrix<Real>>* activations) {
  Matrix<Real> a = inputs.template cast<Real>();
  const auto& layers = mlp.layers();
  if (activations) activations->push_back(a);
  for (std::size_t l = 0; l < layers.size(); ++l) {
    Matrix<Real> z = a * layers[l].weight.transpose();
    z.rowwise() += layers[l].bias.transpose();
    if (l + 1 < layers.size()) {
      a = z.cwiseMax(Real(0));
      if (activations) activations->push_back(a);
    } else {
      return z;
    }
  }
  return a;
}

template <typename Real, typename Derived>
MlpGradients<Real> backprop(const BasicMlp<Real>& mlp, const Eigen::MatrixBase<Derived>& inputs,
                            const Matrix<Real>& targets, bool want_params, bool want_input) {
  check_width(mlp, inputs.cols());
  if (targets.rows() != inputs.rows() || static_cast<std::size_t>(targets.cols()) != mlp.output_dim())
    throw ShapeError("MLP targets shape does not match inputs/output");
  const auto& layers = mlp.layers();
  MlpGradients<Real> g;
  const auto n = inputs.rows();
  if (n == 0) {
    g.input = Matrix<Real>::Zero(0, inputs.cols());
    for (const auto& l : layers) {
      g.weight.push_back(Matrix<Real>::Zero(l.weight.rows(), l.weight.cols()));
      g.bias.push_back(Vector<Real>::Zero(l.bias.size()));
    }
    return g;
  }
  std::vector<Matrix<Real>> acts;
  const Matrix<Real> logits = forward_logits(mlp, inputs, &acts);
  const Matrix<Real> logp = log_softmax(logits);
  g.loss = -static_cast<double>((targets.array() * logp.array()).sum()) / static_cast<double>(n);

  Matrix<Real> delta = (logp.array().exp().matrix() - targets) / static_cast<Real>(n);
  g.weight.resize(layers.size());
  g.bias.resize(layers.size());
  for (std::size_t l = layers.size(); l-- > 0;) {
    if (want_params) {
      g.weight[l] = delta.transpose() * acts[l];
      g.bias[l] = delta.colwise().sum().transpose();
    }
    if (l == 0 && !want_input) break;
    Matrix<Real> da = delta * layers[l].weight;
    if (l > 0) {
      // ReLU derivative; activation > 0 exactly where the pre-activation was.
      delta = (acts[l].array() > Real(0)).select(da, Real(0));
    } else {
      g.input = std::move(da);
    }
  }
  return g;
}

template <typename Real, typename P, typename G>
void adagrad_dense(Eigen::MatrixBase<P>& param, Eigen::MatrixBase<P>& accum, const Eigen::MatrixBase<G>& grad,
                   const OptimizerConfig& cfg) {
  const Real lr = static_cast<Real>(cfg.learning_rate);
  const Real wd = static_cast<Real>(cfg.weight_decay);
  const Real eps = static_cast<Real>(cfg.epsilon);
  for (Eigen::Index i = 0; i < param.size(); ++i) {
    const Real gi = grad(i) + wd * param(i);
    accum(i) += gi * gi;
    param(i) -= lr * gi / (std::sqrt(accum(i)) + eps);
  }
}

}  // namespace detail

/// Row-wise softmax probabilities.
template <typename Real, typename Derived>
Matrix<Real> forward(const BasicMlp<Real>& mlp, const Eigen::MatrixBase<Derived>& inputs) {
  detail::check_width(mlp, inputs.cols());
  if (inputs.rows() == 0) return Matrix<Real>::Zero(0, static_cast<Eigen::Index>(mlp.output_dim()));
  return detail::log_softmax(detail::forward_logits<Real>(mlp, inputs, nullptr)).array().exp().matrix();
}

/// Mean cross-entropy and its gradient w.r.t. every weight, bias and input.
template <typename Real, typename Derived>
MlpGradients<Real> mlp_gradients(const BasicMlp<Real>& mlp, const Eigen::MatrixBase<Derived>& inputs,
                                 const Matrix<Real>& targets) {
  return detail::backprop(mlp, inputs, targets, true, true);
}

/// Mean cross-entropy of `targets` against the MLP's softmax, followed by one
/// Adagrad step on all layers. A non-finite loss or gradient leaves the MLP untouched.
template <typename Real, typename Derived>
double cross_entropy_step(BasicMlp<Real>& mlp, const Eigen::MatrixBase<Derived>& inputs, const Matrix<Real>& targets,
                          const OptimizerConfig& cfg) {
  auto g = detail::backprop(mlp, inputs, targets, true, false);
  if (!std::isfinite(g.loss)) throw NumericError("cross_entropy_step: non-finite loss");
  for (std::size_t l = 0; l < g.weight.size(); ++l)
    if (!g.weight[l].allFinite() || !g.bias[l].allFinite())
      throw NumericError("cross_entropy_step: non-finite gradient");
  if (inputs.rows() == 0) return 0.0;
  auto& layers = mlp.layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    detail::adagrad_dense<Real>(layers[l].weight, layers[l].weight_accum, g.weight[l], cfg);
    detail::adagrad_dense<Real>(layers[l].bias, layers[l].bias_accum, g.bias[l], cfg);
  }
  return g.loss;
}

/// d(mean cross-entropy)/d(inputs); the MLP is not modified.
template <typename Real, typename Derived>
Matrix<Real> input_gradient(const BasicMlp<Real>& mlp, const Eigen::MatrixBase<Derived>& inputs,
                            const Matrix<Real>& targets) {
  return detail::backprop(mlp, inputs, targets, false, true).input;
}

template <typename Real>
Matrix<Real> one_hot(const std::vector<std::size_t>& labels, std::size_t classes) {
  Matrix<Real> t = Matrix<Real>::Zero(static_cast<Eigen::Index>(labels.size()), static_cast<Eigen::Index>(classes));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= classes) throw std::out_of_range("label outside class range");
    t(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(labels[i])) = Real(1);
  }
  return t;
}

template <typename Real, typename Derived>
std::vector<std::size_t> predict(const BasicMlp<Real>& mlp, const Eigen::MatrixBase<Derived>& inputs) {
  const auto probs = forward(mlp, inputs);
  std::vector<std::size_t> out(static_cast<std::size_t>(probs.rows()));
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    Eigen::Index arg = 0;
    probs.row(i).maxCoeff(&arg);
    out[static_cast<std::size_t>(i)] = static_cast<std::size_t>(arg);
  }
  return out;
}

struct FitConfig {
  std::size_t epochs = 200;
  std::size_t batch_size = 256;
  OptimizerConfig optimizer{};
};

/// Shuffled mini-batch training, `epochs` full passes. Returns the mean loss
/// of the final epoch.
template <typename Real>
double fit(BasicMlp<Real>& mlp, const Matrix<Real>& inputs, const Matrix<Real>& targets, const FitConfig& cfg,
           Rng& rng) {
  const auto n = static_cast<std::size_t>(inputs.rows());
  if (n == 0) throw std::invalid_argument("fit: empty training set");
  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  double last = 0.0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const auto len = std::min(cfg.batch_size, n - start);
      std::vector<Eigen::Index> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                    order.begin() + static_cast<std::ptrdiff_t>(start + len));
      const Matrix<Real> x = inputs(idx, Eigen::all);
      const Matrix<Real> t = targets(idx, Eigen::all);
      sum += cross_entropy_step(mlp, x, t, cfg.optimizer);
      ++batches;
    }
    last = sum / static_cast<double>(batches);
  }
  return last;
}

// MLP1 container, same layout conventions as EMB1 ---------------------------

inline constexpr std::uint32_t kMlpVersion = 1;

template <typename Real>
void save_mlp(std::ostream& out, const BasicMlp<Real>& mlp) {
  binary::write_magic(out, "MLP1");
  binary::write<std::uint32_t>(out, kMlpVersion);
  binary::write<std::uint64_t>(out, mlp.spec().seed);
  binary::write<std::uint32_t>(out, sizeof(Real));
  binary::write<std::uint64_t>(out, mlp.spec().layer_dims.size());
  for (auto d : mlp.spec().layer_dims) binary::write<std::uint64_t>(out, d);
  for (const auto& l : mlp.layers()) {
    binary::write_array(out, l.weight.data(), static_cast<std::size_t>(l.weight.size()));
    binary::write_array(out, l.bias.data(), static_cast<std::size_t>(l.bias.size()));
    binary::write_array(out, l.weight_accum.data(), static_cast<std::size_t>(l.weight_accum.size()));
    binary::write_array(out, l.bias_accum.data(), static_cast<std::size_t>(l.bias_accum.size()));
  }
}

template <typename Real = float>
BasicMlp<Real> load_mlp(std::istream& in) {
  binary::expect_magic(in, "MLP1");
  if (binary::read<std::uint32_t>(in) != kMlpVersion) throw FormatError("unsupported MLP1 version");
  MlpSpec spec;
  spec.seed = binary::read<std::uint64_t>(in);
  if (binary::read<std::uint32_t>(in) != sizeof(Real)) throw FormatError("MLP1 scalar width mismatch");
  const auto count = binary::read<std::uint64_t>(in);
  if (count < 3 || count > 64) throw FormatError("MLP1 layer count out of range");
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto d = binary::read<std::uint64_t>(in);
    if (d < 1 || d > (1u << 24)) throw FormatError("MLP1 layer width out of range");
    spec.layer_dims.push_back(d);
  }
  BasicMlp<Real> mlp(spec);
  for (auto& l : mlp.layers()) {
    binary::read_array(in, l.weight.data(), static_cast<std::size_t>(l.weight.size()));
    binary::read_array(in, l.bias.data(), static_cast<std::size_t>(l.bias.size()));
    binary::read_array(in, l.weight_accum.data(), static_cast<std::size_t>(l.weight_accum.size()));
    binary::read_array(in, l.bias_accum.data(), static_cast<std::size_t>(l.bias_accum.size()));
  }
  return mlp;
}

template <typename Real>
void save_mlp(const std::string& path, const BasicMlp<Real>& mlp) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  save_mlp(out, mlp);
}

template <typename Real = float>
BasicMlp<Real> load_mlp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open MLP file: " + path);
  return load_mlp<Real>(in);
}

}  // namespace sumshine
