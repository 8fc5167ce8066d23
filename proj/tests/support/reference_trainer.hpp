// Copyright (c) 2026, The Sumshine Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <map>
#include <utility>
#include <vector>

#include "sumshine/sampling.hpp"
#include "sumshine/scoring.hpp"

namespace sumshine::testing {

/// Independent reference: plain margin-loss SGD-with-Adagrad on dense double tables.
struct ReferenceTrainer {
  ModelKind kind;
  double margin;
  OptimizerConfig opt;
  std::vector<std::vector<double>> ent, rel, ent_acc, rel_acc;

  double energy(const Triple& t) const {
    const auto &h = ent[t.head], &r = rel[t.relation], &tl = ent[t.tail];
    double e = 0;
    for (std::size_t k = 0; k < h.size(); ++k)
      e += kind == ModelKind::TransE ? std::abs(h[k] + r[k] - tl[k]) : -(h[k] * r[k] * tl[k]);
    return e;
  }

  using Grad = std::map<std::pair<int, std::uint64_t>, std::vector<double>>;

  void add_energy_grad(const Triple& t, double scale, Grad& g) const {
    const auto &h = ent[t.head], &r = rel[t.relation], &tl = ent[t.tail];
    const auto d = h.size();
    auto& gh = g.try_emplace({0, t.head}, d, 0.0).first->second;
    auto& gr = g.try_emplace({1, t.relation}, d, 0.0).first->second;
    auto& gt = g.try_emplace({0, t.tail}, d, 0.0).first->second;
    for (std::size_t k = 0; k < d; ++k) {
      if (kind == ModelKind::TransE) {
        const double u = h[k] + r[k] - tl[k];
        const double s = u > 0 ? 1.0 : (u < 0 ? -1.0 : 0.0);
        gh[k] += scale * s;
        gr[k] += scale * s;
        gt[k] -= scale * s;
      } else {
        gh[k] -= scale * r[k] * tl[k];
        gr[k] -= scale * h[k] * tl[k];
        gt[k] -= scale * h[k] * r[k];
      }
    }
  }

  /// Every source is evaluated on the round's starting parameters, then the
  /// per-source updates are applied in source order.
  void round(const std::vector<Batch>& batches) {
    std::vector<Grad> grads;
    for (const auto& b : batches) grads.push_back(source_gradient(b));
    for (const auto& g : grads) apply(g);
  }

  Grad source_gradient(const Batch& b) const {
    Grad g;
    const double per = 1.0 / static_cast<double>(b.positives.size());
    for (std::size_t i = 0; i < b.positives.size(); ++i) {
      const double ep = energy(b.positives[i]);
      for (const auto& n : b.negatives_of(i)) {
        if (ep - energy(n) + margin <= 0) continue;
        add_energy_grad(b.positives[i], per, g);
        add_energy_grad(n, -per, g);
      }
    }
    return g;
  }

  void apply(const Grad& g) {
    for (const auto& [key, grad] : g) {
      auto& p = key.first == 0 ? ent[key.second] : rel[key.second];
      auto& a = key.first == 0 ? ent_acc[key.second] : rel_acc[key.second];
      for (std::size_t k = 0; k < p.size(); ++k) {
        const double gi = grad[k] + opt.weight_decay * p[k];
        a[k] += gi * gi;
        p[k] -= opt.learning_rate * gi / (std::sqrt(a[k]) + opt.epsilon);
      }
    }
  }
};

inline std::vector<std::vector<double>> rows_of(const RowMatrix<double>& m) {
  std::vector<std::vector<double>> out(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) out[i].assign(m.row(i).data(), m.row(i).data() + m.cols());
  return out;
}

}  // namespace sumshine::testing
