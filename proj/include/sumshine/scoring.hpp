// Copyright (c) 2026, The Sumshine Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "sumshine/embedding_store.hpp"
#include "sumshine/graph.hpp"
#include "sumshine/model.hpp"

namespace sumshine {

namespace detail {

template <typename Real>
using ConstRow = Eigen::Map<const Vector<Real>>;
template <typename Real>
using ConstSquare = Eigen::Map<const RowMatrix<Real>>;

template <typename Real>
ConstRow<Real> row_of(const BasicEmbeddingStore<Real>& s, Table t, std::uint64_t id) {
  const auto& m = s.table(t).values;
  return ConstRow<Real>(m.row(static_cast<Eigen::Index>(id)).data(), m.cols());
}

template <typename Real>
ConstSquare<Real> matrix_of(const BasicEmbeddingStore<Real>& s, std::uint64_t rel) {
  const auto& m = s.table(Table::RelationMatrix).values;
  const auto d = static_cast<Eigen::Index>(s.dim);
  return ConstSquare<Real>(m.row(static_cast<Eigen::Index>(rel)).data(), d, d);
}

template <typename Real>
Real sign(Real x) {
  return x > Real(0) ? Real(1) : (x < Real(0) ? Real(-1) : Real(0));
}

/// ||u||_p and its (sub)gradient; sign(0) = 0 for p = 1, zero vector at u = 0 for p = 2.
template <typename Real>
Real norm_and_grad(const Vector<Real>& u, int p, Vector<Real>* grad) {
  if (p == 1) {
    if (grad) *grad = u.unaryExpr([](Real x) { return sign(x); });
    return u.cwiseAbs().sum();
  }
  const Real n = u.norm();
  if (grad) {
    if (n > Real(0))
      *grad = u / n;
    else
      *grad = Vector<Real>::Zero(u.size());
  }
  return n;
}

/// Translation residual h_perp + r - t_perp for the three translational kinds.
template <typename Real>
Vector<Real> residual(const BasicEmbeddingStore<Real>& s, const Triple& tr) {
  const auto h = row_of(s, Table::Entity, tr.head);
  const auto r = row_of(s, Table::Relation, tr.relation);
  const auto t = row_of(s, Table::Entity, tr.tail);
  switch (s.model.kind) {
    case ModelKind::TransE: return h + r - t;
    case ModelKind::TransR: {
      const auto m = matrix_of(s, tr.relation);
      return m * (h - t) + r;
    }
    case ModelKind::TransD: {
      const auto hp = row_of(s, Table::EntityProj, tr.head);
      const auto tp = row_of(s, Table::EntityProj, tr.tail);
      const auto rp = row_of(s, Table::RelationProj, tr.relation);
      return h + rp * hp.dot(h) + r - t - rp * tp.dot(t);
    }
    default: break;
  }
  throw std::logic_error("residual: not a translational model");
}

}  // namespace detail

/// Energy of a triple under the store's model; lower means more plausible.
///   TransE  ||h + r - t||_p
///   TransR  ||M_r h + r - M_r t||_p
///   TransD  ||(r_p h_p^T + I) h + r - (r_p t_p^T + I) t||_p
///   RESCAL  -h^T M_r t
///   DistMult -<h, r, t>
///   ComplEx -Re(<h, r, conj(t)>), vectors stored as interleaved (re, im) pairs
template <typename Real>
Real energy(const BasicEmbeddingStore<Real>& s, const Triple& tr) {
  using namespace detail;
  switch (s.model.kind) {
    case ModelKind::TransE:
    case ModelKind::TransR:
    case ModelKind::TransD: return norm_and_grad<Real>(residual(s, tr), s.model.norm, nullptr);
    case ModelKind::Rescal: {
      const auto h = row_of(s, Table::Entity, tr.head);
      const auto t = row_of(s, Table::Entity, tr.tail);
      return -h.dot(matrix_of(s, tr.relation) * t);
    }
    case ModelKind::DistMult: {
      const auto h = row_of(s, Table::Entity, tr.head);
      const auto r = row_of(s, Table::Relation, tr.relation);
      const auto t = row_of(s, Table::Entity, tr.tail);
      return -(h.array() * r.array() * t.array()).sum();
    }
    case ModelKind::ComplEx: {
      const auto h = row_of(s, Table::Entity, tr.head);
      const auto r = row_of(s, Table::Relation, tr.relation);
      const auto t = row_of(s, Table::Entity, tr.tail);
      Real acc = 0;
      for (Eigen::Index k = 0; k + 1 < h.size(); k += 2) {
        const Real a = h[k], b = h[k + 1], c = r[k], d = r[k + 1], e = t[k], f = t[k + 1];
        acc += (a * c - b * d) * e + (a * d + b * c) * f;
      }
      return -acc;
    }
  }
  return 0;
}

/// Adds scale * dE/dtheta for every parameter row the triple touches.
template <typename Real>
void accumulate_energy_grad(const BasicEmbeddingStore<Real>& s, const Triple& tr, Real scale,
                            SparseGradient<Real>& out) {
  using namespace detail;
  const auto h = row_of(s, Table::Entity, tr.head);
  const auto r = row_of(s, Table::Relation, tr.relation);
  const auto t = row_of(s, Table::Entity, tr.tail);
  const auto d = static_cast<Eigen::Index>(s.dim);

  switch (s.model.kind) {
    case ModelKind::TransE: {
      Vector<Real> g;
      norm_and_grad<Real>(residual(s, tr), s.model.norm, &g);
      out.add(Table::Entity, tr.head, g, scale);
      out.add(Table::Relation, tr.relation, g, scale);
      out.add(Table::Entity, tr.tail, g, -scale);
      return;
    }
    case ModelKind::TransR: {
      Vector<Real> g;
      norm_and_grad<Real>(residual(s, tr), s.model.norm, &g);
      const auto m = matrix_of(s, tr.relation);
      const Vector<Real> mg = m.transpose() * g;
      out.add(Table::Entity, tr.head, mg, scale);
      out.add(Table::Entity, tr.tail, mg, -scale);
      out.add(Table::Relation, tr.relation, g, scale);
      const Vector<Real> diff = h - t;
      Real* dm = out.row_span(Table::RelationMatrix, tr.relation);
      for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = 0; j < d; ++j) dm[i * d + j] += scale * g[i] * diff[j];
      return;
    }
    case ModelKind::TransD: {
      Vector<Real> g;
      norm_and_grad<Real>(residual(s, tr), s.model.norm, &g);
      const auto hp = row_of(s, Table::EntityProj, tr.head);
      const auto tp = row_of(s, Table::EntityProj, tr.tail);
      const auto rp = row_of(s, Table::RelationProj, tr.relation);
      const Real rg = rp.dot(g);
      out.add(Table::Entity, tr.head, g + hp * rg, scale);
      out.add(Table::EntityProj, tr.head, h * rg, scale);
      out.add(Table::Entity, tr.tail, g + tp * rg, -scale);
      out.add(Table::EntityProj, tr.tail, t * rg, -scale);
      out.add(Table::Relation, tr.relation, g, scale);
      out.add(Table::RelationProj, tr.relation, g * (hp.dot(h) - tp.dot(t)), scale);
      return;
    }
    case ModelKind::Rescal: {
      const auto m = matrix_of(s, tr.relation);
      out.add(Table::Entity, tr.head, -(m * t), scale);
      out.add(Table::Entity, tr.tail, -(m.transpose() * h), scale);
      // Relation vectors are unused by RESCAL but exist (for alignment); they get no gradient.
      Real* dm = out.row_span(Table::RelationMatrix, tr.relation);
      for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = 0; j < d; ++j) dm[i * d + j] -= scale * h[i] * t[j];
      return;
    }
    case ModelKind::DistMult: {
      out.add(Table::Entity, tr.head, -(r.array() * t.array()).matrix(), scale);
      out.add(Table::Relation, tr.relation, -(h.array() * t.array()).matrix(), scale);
      out.add(Table::Entity, tr.tail, -(h.array() * r.array()).matrix(), scale);
      return;
    }
    case ModelKind::ComplEx: {
      Vector<Real> gh(d), gr(d), gt(d);
      for (Eigen::Index k = 0; k + 1 < d; k += 2) {
        const Real a = h[k], b = h[k + 1], c = r[k], dd = r[k + 1], e = t[k], f = t[k + 1];
        gh[k] = -(c * e + dd * f);
        gh[k + 1] = dd * e - c * f;
        gr[k] = -(a * e + b * f);
        gr[k + 1] = b * e - a * f;
        gt[k] = -(a * c - b * dd);
        gt[k + 1] = -(a * dd + b * c);
      }
      out.add(Table::Entity, tr.head, gh, scale);
      out.add(Table::Relation, tr.relation, gr, scale);
      out.add(Table::Entity, tr.tail, gt, scale);
      return;
    }
  }
}

template <typename Real>
SparseGradient<Real> energy_grad(const BasicEmbeddingStore<Real>& s, const Triple& tr) {
  auto g = s.make_gradient();
  accumulate_energy_grad(s, tr, Real(1), g);
  return g;
}

struct MarginLoss {
  double loss = 0.0;
  double d_pos = 0.0;             // dL / dE(pos)
  std::vector<double> d_negs;     // dL / dE(neg_j)
};

/// sum_j [E(pos) - E(neg_j) + margin]_+ with its derivative w.r.t. every energy.
inline MarginLoss margin_loss(const ScoringModel& model, double pos, std::span<const double> negs) {
  if (negs.empty()) throw std::invalid_argument("margin_loss: at least one negative required");
  MarginLoss out;
  out.d_negs.resize(negs.size(), 0.0);
  // A NaN energy would silently fail every hinge comparison; surface it instead.
  if (!std::isfinite(pos) || !std::all_of(negs.begin(), negs.end(), [](double e) { return std::isfinite(e); })) {
    out.loss = std::numeric_limits<double>::quiet_NaN();
    return out;
  }
  for (std::size_t j = 0; j < negs.size(); ++j) {
    const double hinge = pos - negs[j] + model.margin;
    if (hinge > 0.0) {
      out.loss += hinge;
      out.d_pos += 1.0;
      out.d_negs[j] = -1.0;
    }
  }
  return out;
}

}  // namespace sumshine
