// Copyright (c) 2026, The Sumshine Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "sumshine/embedding_store.hpp"
#include "sumshine/error.hpp"

namespace sumshine {

enum class AlignmentKind { None, KL, JS, MMD, Adversarial };

inline std::string_view to_string(AlignmentKind k) {
  switch (k) {
    case AlignmentKind::None: return "none";
    case AlignmentKind::KL: return "kl";
    case AlignmentKind::JS: return "js";
    case AlignmentKind::MMD: return "mmd";
    case AlignmentKind::Adversarial: return "adversarial";
  }
  return "?";
}

inline AlignmentKind parse_alignment_kind(std::string_view s) {
  if (s == "none") return AlignmentKind::None;
  if (s == "kl") return AlignmentKind::KL;
  if (s == "js") return AlignmentKind::JS;
  if (s == "mmd") return AlignmentKind::MMD;
  if (s == "adversarial" || s == "adv") return AlignmentKind::Adversarial;
  throw ConfigError("unknown alignment kind: " + std::string(s));
}

/// Confusion target for the adversarial embedding update.
enum class AdversarialTarget { Uniform, Flip };

/// Gaussian-kernel bandwidth: fixed sigma, or the median pairwise distance of
/// the pooled sample recomputed per call.
struct Bandwidth {
  bool median_heuristic = true;
  double sigma = 1.0;

  static Bandwidth fixed(double s) { return {false, s}; }
  static Bandwidth median() { return {true, 1.0}; }
};

struct AlignmentSpec {
  AlignmentKind kind = AlignmentKind::None;
  Bandwidth mmd_bandwidth = Bandwidth::median();
  std::size_t hist_bins = 64;
  double hist_smoothing = 1e-8;
  double lambda = 1.0;
  AdversarialTarget adversarial_target = AdversarialTarget::Uniform;
  std::vector<std::size_t> discriminator_hidden = {128, 128};

  void validate() const {
    if (!(lambda >= 0.0)) throw ConfigError("lambda must be non-negative");
    if (hist_bins < 2) throw ConfigError("hist_bins must be >= 2");
    if (!(hist_smoothing > 0.0)) throw ConfigError("hist_smoothing must be positive");
    if (!mmd_bandwidth.median_heuristic && !(mmd_bandwidth.sigma > 0.0))
      throw ConfigError("mmd bandwidth must be positive");
    if (discriminator_hidden.empty()) throw ConfigError("discriminator needs at least one hidden layer");
  }
};

/// A discrepancy value with its gradient w.r.t. every row of both samples.
template <typename Real>
struct Divergence {
  double value = 0.0;
  RowMatrix<Real> grad_p;
  RowMatrix<Real> grad_q;
};

namespace detail {

template <typename Real>
void check_pair(const RowMatrix<Real>& p, const RowMatrix<Real>& q, Eigen::Index min_rows, const char* who) {
  if (p.rows() < min_rows || q.rows() < min_rows)
    throw ShapeError(std::string(who) + ": each sample needs at least " + std::to_string(min_rows) + " rows");
  if (p.cols() != q.cols()) throw ShapeError(std::string(who) + ": samples differ in dimension");
}

/// Squared Euclidean distances between the rows of a and b.
inline Eigen::MatrixXd sq_distances(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Eigen::MatrixXd d = (-2.0 * a * b.transpose()).colwise() + a.rowwise().squaredNorm();
  d.rowwise() += b.rowwise().squaredNorm().transpose();
  return d.cwiseMax(0.0);
}

}  // namespace detail

/// Median pairwise distance over the pooled rows of p and q (sigma for the
/// median heuristic). Falls back to 1 when every pooled row coincides.
template <typename Real>
double median_pairwise_distance(const RowMatrix<Real>& p, const RowMatrix<Real>& q) {
  Eigen::MatrixXd pooled(p.rows() + q.rows(), p.cols());
  pooled << p.template cast<double>(), q.template cast<double>();
  const Eigen::MatrixXd d2 = detail::sq_distances(pooled, pooled);
  std::vector<double> dist;
  dist.reserve(static_cast<std::size_t>(pooled.rows() * (pooled.rows() - 1) / 2));
  for (Eigen::Index i = 0; i < pooled.rows(); ++i)
    for (Eigen::Index j = i + 1; j < pooled.rows(); ++j) dist.push_back(std::sqrt(d2(i, j)));
  if (dist.empty()) return 1.0;
  auto mid = dist.begin() + static_cast<std::ptrdiff_t>(dist.size() / 2);
  std::nth_element(dist.begin(), mid, dist.end());
  double m = *mid;
  if (dist.size() % 2 == 0) m = 0.5 * (m + *std::max_element(dist.begin(), mid));
  return m > 0.0 ? m : 1.0;
}

/// Unbiased squared MMD with k(x, y) = exp(-||x - y||^2 / (2 sigma^2)).
/// `estimate` may be slightly negative; `value` is the loss, clamped at zero,
/// and the gradients vanish when the clamp is active. sigma is a constant for
/// differentiation even under the median heuristic.
template <typename Real>
struct MmdResult : Divergence<Real> {
  double estimate = 0.0;
  double sigma = 0.0;
};

template <typename Real>
MmdResult<Real> mmd2(const RowMatrix<Real>& p, const RowMatrix<Real>& q, const Bandwidth& bw,
                     bool with_grad = true) {
  detail::check_pair(p, q, 2, "mmd2");
  if (!bw.median_heuristic && !(bw.sigma > 0.0)) throw ConfigError("mmd2: bandwidth must be positive");
  const double sigma = bw.median_heuristic ? median_pairwise_distance(p, q) : bw.sigma;
  const double inv2s2 = 1.0 / (2.0 * sigma * sigma);

  const Eigen::MatrixXd x = p.template cast<double>();
  const Eigen::MatrixXd y = q.template cast<double>();
  const double m = static_cast<double>(x.rows());
  const double n = static_cast<double>(y.rows());
  Eigen::MatrixXd kxx = (-inv2s2 * detail::sq_distances(x, x)).array().exp().matrix();
  Eigen::MatrixXd kyy = (-inv2s2 * detail::sq_distances(y, y)).array().exp().matrix();
  const Eigen::MatrixXd kxy = (-inv2s2 * detail::sq_distances(x, y)).array().exp().matrix();
  kxx.diagonal().setZero();
  kyy.diagonal().setZero();

  const double a = 1.0 / (m * (m - 1.0));
  const double b = 1.0 / (n * (n - 1.0));
  const double c = 2.0 / (m * n);

  MmdResult<Real> out;
  out.sigma = sigma;
  out.estimate = a * kxx.sum() + b * kyy.sum() - c * kxy.sum();
  out.value = std::max(0.0, out.estimate);
  out.grad_p = RowMatrix<Real>::Zero(p.rows(), p.cols());
  out.grad_q = RowMatrix<Real>::Zero(q.rows(), q.cols());
  if (!with_grad || out.estimate <= 0.0) return out;

  // d k(u, v) / du = -k(u, v) (u - v) / sigma^2
  const double s2 = 1.0 / (sigma * sigma);
  const Eigen::VectorXd kxx_rows = kxx.rowwise().sum();
  const Eigen::VectorXd kyy_rows = kyy.rowwise().sum();
  const Eigen::VectorXd kxy_rows = kxy.rowwise().sum();
  const Eigen::VectorXd kxy_cols = kxy.colwise().sum().transpose();
  Eigen::MatrixXd gx = -2.0 * a * s2 * (kxx_rows.asDiagonal() * x - kxx * x);
  gx += c * s2 * (kxy_rows.asDiagonal() * x - kxy * y);
  Eigen::MatrixXd gy = -2.0 * b * s2 * (kyy_rows.asDiagonal() * y - kyy * y);
  gy += c * s2 * (kxy_cols.asDiagonal() * y - kxy.transpose() * x);
  out.grad_p = gx.cast<Real>();
  out.grad_q = gy.cast<Real>();
  return out;
}

inline constexpr double kVarianceFloor = 1e-6;

/// KL(N_P || N_Q) between diagonal Gaussians fitted to the two samples
/// (per-dimension mean and unbiased variance, variance floored at 1e-6),
/// summed over dimensions.
template <typename Real>
Divergence<Real> gaussian_kl(const RowMatrix<Real>& p, const RowMatrix<Real>& q, bool with_grad = true) {
  detail::check_pair(p, q, 2, "gaussian_kl");
  const Eigen::MatrixXd x = p.template cast<double>();
  const Eigen::MatrixXd y = q.template cast<double>();
  const double np = static_cast<double>(x.rows());
  const double nq = static_cast<double>(y.rows());
  const Eigen::RowVectorXd mp = x.colwise().mean();
  const Eigen::RowVectorXd mq = y.colwise().mean();
  const Eigen::MatrixXd cp = x.rowwise() - mp;
  const Eigen::MatrixXd cq = y.rowwise() - mq;
  const Eigen::RowVectorXd raw_vp = cp.colwise().squaredNorm() / (np - 1.0);
  const Eigen::RowVectorXd raw_vq = cq.colwise().squaredNorm() / (nq - 1.0);
  const Eigen::RowVectorXd vp = raw_vp.cwiseMax(kVarianceFloor);
  const Eigen::RowVectorXd vq = raw_vq.cwiseMax(kVarianceFloor);
  const Eigen::RowVectorXd delta = mp - mq;

  Divergence<Real> out;
  const Eigen::ArrayXd per_dim =
      0.5 * ((vq.array() / vp.array()).log() + (vp.array() + delta.array().square()) / vq.array() - 1.0);
  out.value = std::max(0.0, per_dim.sum());
  if (!with_grad) return out;

  const Eigen::RowVectorXd d_mp = (delta.array() / vq.array()).matrix();
  const Eigen::RowVectorXd d_mq = -d_mp;
  Eigen::RowVectorXd d_vp = (0.5 * (1.0 / vq.array() - 1.0 / vp.array())).matrix();
  Eigen::RowVectorXd d_vq =
      (0.5 * (1.0 / vq.array() - (vp.array() + delta.array().square()) / vq.array().square())).matrix();
  // The floor is flat: no gradient flows through a clamped variance.
  for (Eigen::Index j = 0; j < d_vp.size(); ++j) {
    if (raw_vp[j] < kVarianceFloor) d_vp[j] = 0.0;
    if (raw_vq[j] < kVarianceFloor) d_vq[j] = 0.0;
  }
  Eigen::MatrixXd gx = cp.array().rowwise() * (2.0 * d_vp.array() / (np - 1.0));
  gx.rowwise() += d_mp / np;
  Eigen::MatrixXd gy = cq.array().rowwise() * (2.0 * d_vq.array() / (nq - 1.0));
  gy.rowwise() += d_mq / nq;
  out.grad_p = gx.cast<Real>();
  out.grad_q = gy.cast<Real>();
  return out;
}

/// 1/2 (KL(P||Q) + KL(Q||P)) on the Gaussian surrogate.
template <typename Real>
Divergence<Real> sym_js(const RowMatrix<Real>& p, const RowMatrix<Real>& q, bool with_grad = true) {
  auto pq = gaussian_kl(p, q, with_grad);
  auto qp = gaussian_kl(q, p, with_grad);
  Divergence<Real> out;
  out.value = 0.5 * (pq.value + qp.value);
  if (with_grad) {
    out.grad_p = (Real(0.5) * (pq.grad_p + qp.grad_q)).eval();
    out.grad_q = (Real(0.5) * (pq.grad_q + qp.grad_p)).eval();
  }
  return out;
}

/// Histogram estimate of 1/2 (KL(P||Q) + KL(Q||P)), averaged over dimensions.
/// Each dimension uses H equal-width bins spanning the pooled min/max, adds
/// `smoothing` to every count and normalizes; constant dimensions contribute 0.
template <typename Real>
double hist_js(const RowMatrix<Real>& p, const RowMatrix<Real>& q, std::size_t bins = 64, double smoothing = 1e-8) {
  detail::check_pair(p, q, 1, "hist_js");
  if (bins < 2) throw ConfigError("hist_js: need at least 2 bins");
  const auto d = p.cols();
  if (d == 0) return 0.0;
  double total = 0.0;
  std::vector<double> hp(bins), hq(bins);
  for (Eigen::Index j = 0; j < d; ++j) {
    const double lo = std::min(static_cast<double>(p.col(j).minCoeff()), static_cast<double>(q.col(j).minCoeff()));
    const double hi = std::max(static_cast<double>(p.col(j).maxCoeff()), static_cast<double>(q.col(j).maxCoeff()));
    if (!(hi > lo)) continue;
    auto fill = [&](const auto& col, std::vector<double>& h) {
      std::fill(h.begin(), h.end(), smoothing);
      for (Eigen::Index i = 0; i < col.size(); ++i) {
        const double t = (static_cast<double>(col[i]) - lo) / (hi - lo);
        auto b = static_cast<std::size_t>(t * static_cast<double>(bins));
        h[std::min(b, bins - 1)] += 1.0;
      }
      const double norm = static_cast<double>(col.size()) + smoothing * static_cast<double>(bins);
      for (auto& v : h) v /= norm;
    };
    fill(p.col(j), hp);
    fill(q.col(j), hq);
    double kl_pq = 0.0, kl_qp = 0.0;
    for (std::size_t b = 0; b < bins; ++b) {
      kl_pq += hp[b] * std::log(hp[b] / hq[b]);
      kl_qp += hq[b] * std::log(hq[b] / hp[b]);
    }
    total += 0.5 * (kl_pq + kl_qp);
  }
  return total / static_cast<double>(d);
}

/// One measure term for the distance-based regularizers.
template <typename Real>
Divergence<Real> measure(const AlignmentSpec& spec, const RowMatrix<Real>& p, const RowMatrix<Real>& q) {
  switch (spec.kind) {
    case AlignmentKind::KL: return gaussian_kl(p, q);
    case AlignmentKind::JS: return sym_js(p, q);
    case AlignmentKind::MMD: return mmd2(p, q, spec.mmd_bandwidth);
    default: break;
  }
  throw ConfigError("measure: alignment kind '" + std::string(to_string(spec.kind)) + "' is not a distance measure");
}

template <typename Real>
struct DistLoss {
  double value = 0.0;
  bool disabled = false;  // K < 2
  std::vector<RowMatrix<Real>> entity_grads;
  std::vector<RowMatrix<Real>> relation_grads;
  std::size_t terms = 0;
};

/// Sum over unordered source pairs (i < j) of measure(entity_i, entity_j) +
/// measure(relation_i, relation_j). The relation term is skipped when either
/// side has fewer than two rows. Directed measures (KL) use the i -> j direction.
template <typename Real>
DistLoss<Real> dist_loss(const std::vector<RowMatrix<Real>>& entity_samples,
                         const std::vector<RowMatrix<Real>>& relation_samples, const AlignmentSpec& spec) {
  if (entity_samples.size() != relation_samples.size())
    throw ShapeError("dist_loss: entity and relation sample lists differ in length");
  DistLoss<Real> out;
  const auto k = entity_samples.size();
  for (std::size_t i = 0; i < k; ++i) {
    out.entity_grads.push_back(RowMatrix<Real>::Zero(entity_samples[i].rows(), entity_samples[i].cols()));
    out.relation_grads.push_back(RowMatrix<Real>::Zero(relation_samples[i].rows(), relation_samples[i].cols()));
  }
  if (k < 2) {
    out.disabled = true;
    return out;
  }
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i + 1; j < k; ++j) {
      if (entity_samples[i].rows() >= 2 && entity_samples[j].rows() >= 2) {
        auto m = measure(spec, entity_samples[i], entity_samples[j]);
        out.value += m.value;
        out.entity_grads[i] += m.grad_p;
        out.entity_grads[j] += m.grad_q;
        ++out.terms;
      }
      if (relation_samples[i].rows() >= 2 && relation_samples[j].rows() >= 2) {
        auto m = measure(spec, relation_samples[i], relation_samples[j]);
        out.value += m.value;
        out.relation_grads[i] += m.grad_p;
        out.relation_grads[j] += m.grad_q;
        ++out.terms;
      }
    }
  }
  return out;
}

}  // namespace sumshine
