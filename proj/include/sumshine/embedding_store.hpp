// Copyright (c) 2026, The Sumshine Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <istream>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "sumshine/binary_io.hpp"
#include "sumshine/error.hpp"
#include "sumshine/model.hpp"
#include "sumshine/rng.hpp"

namespace sumshine {

template <typename Real>
using RowMatrix = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Real>
using Vector = Eigen::Matrix<Real, Eigen::Dynamic, 1>;

struct OptimizerConfig {
  double learning_rate = 0.005;
  double weight_decay = 0.001;
  double epsilon = 1e-10;

  void validate() const {
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
    if (weight_decay < 0.0) throw ConfigError("weight_decay must be non-negative");
    if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
  }
};

/// One parameter table and its Adagrad accumulator, row-major so a row is
/// contiguous.
template <typename Real>
struct ParamTable {
  RowMatrix<Real> values;
  RowMatrix<Real> accum;

  bool empty() const noexcept { return values.size() == 0; }
  friend bool operator==(const ParamTable& a, const ParamTable& b) {
    return a.values.rows() == b.values.rows() && a.values.cols() == b.values.cols() &&
           a.accum.rows() == b.accum.rows() && a.accum.cols() == b.accum.cols() &&
           std::equal(a.values.data(), a.values.data() + a.values.size(), b.values.data()) &&
           std::equal(a.accum.data(), a.accum.data() + a.accum.size(), b.accum.data());
  }
};

/// Row-sparse gradient over the store's tables. Rows are accumulated in place;
/// `entries()` yields them in (table, row) order, which is also the apply order.
template <typename Real>
class SparseGradient {
 public:
  struct Entry {
    Table table;
    std::uint64_t row;
    std::size_t offset;
    std::size_t width;
  };

  SparseGradient() = default;
  explicit SparseGradient(std::array<std::size_t, kNumTables> widths) : widths_(widths) {}

  template <typename Derived>
  void add(Table table, std::uint64_t row, const Eigen::MatrixBase<Derived>& g, Real scale = Real(1)) {
    auto span = row_span(table, row);
    for (Eigen::Index i = 0; i < g.size(); ++i) span[i] += scale * g(i);
  }

  /// Mutable view of a row, created zeroed on first touch. Invalidated by the next call.
  Real* row_span(Table table, std::uint64_t row) {
    const auto key = (static_cast<std::uint64_t>(table) << 59) | row;
    auto it = index_.find(key);
    if (it == index_.end()) {
      const auto width = widths_[static_cast<std::size_t>(table)];
      if (width == 0) throw std::logic_error("gradient for a table the model does not have");
      it = index_.emplace(key, entries_.size()).first;
      entries_.push_back({table, row, buffer_.size(), width});
      buffer_.resize(buffer_.size() + width, Real(0));
      sorted_ = false;
    }
    return buffer_.data() + entries_[it->second].offset;
  }

  const Real* find(Table table, std::uint64_t row) const {
    const auto key = (static_cast<std::uint64_t>(table) << 59) | row;
    auto it = index_.find(key);
    if (it == index_.end()) return nullptr;
    return buffer_.data() + entries_[it->second].offset;
  }

  void merge(const SparseGradient& other, Real scale = Real(1)) {
    for (const auto& e : other.entries_) {
      Real* dst = row_span(e.table, e.row);
      const Real* src = other.buffer_.data() + e.offset;
      for (std::size_t i = 0; i < e.width; ++i) dst[i] += scale * src[i];
    }
  }

  void scale(Real s) {
    for (auto& v : buffer_) v *= s;
  }

  const std::vector<Entry>& entries() const {
    if (!sorted_) {
      std::sort(entries_.begin(), entries_.end(), [](const Entry& a, const Entry& b) {
        return a.table != b.table ? a.table < b.table : a.row < b.row;
      });
      for (std::size_t i = 0; i < entries_.size(); ++i) {
        const auto key = (static_cast<std::uint64_t>(entries_[i].table) << 59) | entries_[i].row;
        index_[key] = i;
      }
      sorted_ = true;
    }
    return entries_;
  }

  const Real* data(const Entry& e) const { return buffer_.data() + e.offset; }
  bool empty() const noexcept { return entries_.empty(); }
  std::size_t size() const noexcept { return entries_.size(); }

  bool all_finite() const {
    return std::all_of(buffer_.begin(), buffer_.end(), [](Real v) { return std::isfinite(v); });
  }

 private:
  std::array<std::size_t, kNumTables> widths_{};
  mutable std::vector<Entry> entries_;
  mutable std::unordered_map<std::uint64_t, std::size_t> index_;
  std::vector<Real> buffer_;
  mutable bool sorted_ = true;
};

/// All learnable parameters of one scoring model plus optimizer state.
template <typename Real>
class BasicEmbeddingStore {
 public:
  ScoringModel model;
  std::size_t num_entities = 0;
  std::size_t num_relations = 0;
  std::size_t dim = 0;
  std::uint64_t seed = 0;

  ParamTable<Real>& table(Table t) { return tables_[static_cast<std::size_t>(t)]; }
  const ParamTable<Real>& table(Table t) const { return tables_[static_cast<std::size_t>(t)]; }
  bool has(Table t) const { return !table(t).empty(); }

  bool complex_flag() const noexcept { return model.kind == ModelKind::ComplEx; }

  auto entity(std::uint64_t id) const { return table(Table::Entity).values.row(static_cast<Eigen::Index>(id)); }
  auto relation(std::uint64_t id) const {
    return table(Table::Relation).values.row(static_cast<Eigen::Index>(id));
  }

  /// Per-table row widths, zero for tables the model does not carry.
  std::array<std::size_t, kNumTables> widths() const {
    std::array<std::size_t, kNumTables> w{};
    for (std::size_t i = 0; i < kNumTables; ++i) w[i] = static_cast<std::size_t>(tables_[i].values.cols());
    return w;
  }

  SparseGradient<Real> make_gradient() const { return SparseGradient<Real>(widths()); }

  bool all_finite() const {
    for (const auto& t : tables_)
      if (!t.values.allFinite() || !t.accum.allFinite()) return false;
    return true;
  }

  friend bool operator==(const BasicEmbeddingStore& a, const BasicEmbeddingStore& b) {
    return a.model == b.model && a.num_entities == b.num_entities && a.num_relations == b.num_relations &&
           a.dim == b.dim && a.seed == b.seed && a.tables_ == b.tables_;
  }

 private:
  std::array<ParamTable<Real>, kNumTables> tables_;
};

using EmbeddingStore = BasicEmbeddingStore<float>;

namespace detail {

template <typename Real>
void allocate(ParamTable<Real>& t, std::size_t rows, std::size_t cols) {
  t.values = RowMatrix<Real>::Zero(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  t.accum = RowMatrix<Real>::Zero(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

}  // namespace detail

/// Vector tables ~ U[-6/sqrt(d), 6/sqrt(d)]; square projection matrices start
/// at identity + U[-0.01, 0.01]. Deterministic for a fixed seed.
template <typename Real = float>
BasicEmbeddingStore<Real> init_store(const ScoringModel& model, std::size_t num_entities, std::size_t num_relations,
                                     std::size_t dim, std::uint64_t seed) {
  model.validate();
  if (dim < 1) throw ConfigError("embedding dimension must be >= 1");
  if (model.kind == ModelKind::ComplEx && dim % 2 != 0)
    throw ConfigError("ComplEx needs an even embedding dimension, got " + std::to_string(dim));

  BasicEmbeddingStore<Real> store;
  store.model = model;
  store.num_entities = num_entities;
  store.num_relations = num_relations;
  store.dim = dim;
  store.seed = seed;

  const double bound = 6.0 / std::sqrt(static_cast<double>(dim));
  auto fill_uniform = [&](ParamTable<Real>& t, Table id) {
    Rng rng = make_rng(seed, {static_cast<std::uint64_t>(id)});
    std::uniform_real_distribution<double> u(-bound, bound);
    for (Eigen::Index i = 0; i < t.values.size(); ++i) t.values.data()[i] = static_cast<Real>(u(rng));
  };

  detail::allocate(store.table(Table::Entity), num_entities, dim);
  fill_uniform(store.table(Table::Entity), Table::Entity);
  detail::allocate(store.table(Table::Relation), num_relations, dim);
  fill_uniform(store.table(Table::Relation), Table::Relation);

  if (model_uses(model.kind, Table::EntityProj)) {
    detail::allocate(store.table(Table::EntityProj), num_entities, dim);
    fill_uniform(store.table(Table::EntityProj), Table::EntityProj);
    detail::allocate(store.table(Table::RelationProj), num_relations, dim);
    fill_uniform(store.table(Table::RelationProj), Table::RelationProj);
  }
  if (model_uses(model.kind, Table::RelationMatrix)) {
    auto& t = store.table(Table::RelationMatrix);
    detail::allocate(t, num_relations, dim * dim);
    Rng rng = make_rng(seed, {static_cast<std::uint64_t>(Table::RelationMatrix)});
    std::uniform_real_distribution<double> noise(-0.01, 0.01);
    for (Eigen::Index r = 0; r < t.values.rows(); ++r)
      for (std::size_t i = 0; i < dim; ++i)
        for (std::size_t j = 0; j < dim; ++j)
          t.values(r, static_cast<Eigen::Index>(i * dim + j)) = static_cast<Real>((i == j ? 1.0 : 0.0) + noise(rng));
  }
  return store;
}

/// Adagrad with coupled weight decay, applied row by row in (table, row) order:
///   g = grad + wd * param;  accum += g^2;  param -= lr * g / (sqrt(accum) + eps)
/// A gradient containing NaN/Inf is rejected before any row is touched.
template <typename Real>
void adagrad_step(BasicEmbeddingStore<Real>& store, const SparseGradient<Real>& grad, const OptimizerConfig& cfg) {
  if (!grad.all_finite()) throw NumericError("adagrad_step: non-finite gradient rejected");
  const Real lr = static_cast<Real>(cfg.learning_rate);
  const Real wd = static_cast<Real>(cfg.weight_decay);
  const Real eps = static_cast<Real>(cfg.epsilon);
  for (const auto& e : grad.entries()) {
    auto& t = store.table(e.table);
    if (e.row >= static_cast<std::uint64_t>(t.values.rows()))
      throw std::out_of_range("adagrad_step: row " + std::to_string(e.row) + " outside table " +
                              std::string(to_string(e.table)));
    Real* p = t.values.row(static_cast<Eigen::Index>(e.row)).data();
    Real* a = t.accum.row(static_cast<Eigen::Index>(e.row)).data();
    const Real* g = grad.data(e);
    for (std::size_t i = 0; i < e.width; ++i) {
      const Real gi = g[i] + wd * p[i];
      a[i] += gi * gi;
      p[i] -= lr * gi / (std::sqrt(a[i]) + eps);
    }
  }
}

// EMB1 container --------------------------------------------------------------

inline constexpr std::uint32_t kStoreVersion = 1;

template <typename Real>
void save_store(std::ostream& out, const BasicEmbeddingStore<Real>& store) {
  binary::write_magic(out, "EMB1");
  binary::write<std::uint32_t>(out, kStoreVersion);
  binary::write<std::uint32_t>(out, static_cast<std::uint32_t>(store.model.kind));
  binary::write<std::uint32_t>(out, static_cast<std::uint32_t>(store.model.norm));
  binary::write<double>(out, store.model.margin);
  binary::write<std::uint64_t>(out, store.num_entities);
  binary::write<std::uint64_t>(out, store.num_relations);
  binary::write<std::uint64_t>(out, store.dim);
  binary::write<std::uint64_t>(out, store.seed);
  binary::write<std::uint8_t>(out, store.complex_flag() ? 1 : 0);
  binary::write<std::uint32_t>(out, sizeof(Real));
  std::uint32_t count = 0;
  for (std::size_t i = 0; i < kNumTables; ++i) count += store.has(static_cast<Table>(i)) ? 1 : 0;
  binary::write<std::uint32_t>(out, count);
  for (std::size_t i = 0; i < kNumTables; ++i) {
    const auto id = static_cast<Table>(i);
    if (!store.has(id)) continue;
    const auto& t = store.table(id);
    binary::write<std::uint32_t>(out, static_cast<std::uint32_t>(id));
    binary::write<std::uint64_t>(out, static_cast<std::uint64_t>(t.values.rows()));
    binary::write<std::uint64_t>(out, static_cast<std::uint64_t>(t.values.cols()));
    binary::write_array(out, t.values.data(), static_cast<std::size_t>(t.values.size()));
    binary::write_array(out, t.accum.data(), static_cast<std::size_t>(t.accum.size()));
  }
}

template <typename Real = float>
BasicEmbeddingStore<Real> load_store(std::istream& in) {
  binary::expect_magic(in, "EMB1");
  if (const auto v = binary::read<std::uint32_t>(in); v != kStoreVersion)
    throw FormatError("unsupported EMB1 version " + std::to_string(v));
  BasicEmbeddingStore<Real> store;
  const auto kind = binary::read<std::uint32_t>(in);
  if (kind > static_cast<std::uint32_t>(ModelKind::ComplEx)) throw FormatError("unknown model tag");
  store.model.kind = static_cast<ModelKind>(kind);
  store.model.norm = static_cast<int>(binary::read<std::uint32_t>(in));
  store.model.margin = binary::read<double>(in);
  store.num_entities = binary::read<std::uint64_t>(in);
  store.num_relations = binary::read<std::uint64_t>(in);
  store.dim = binary::read<std::uint64_t>(in);
  store.seed = binary::read<std::uint64_t>(in);
  const auto complex_flag = binary::read<std::uint8_t>(in);
  if ((complex_flag != 0) != store.complex_flag()) throw FormatError("complex flag does not match model tag");
  if (binary::read<std::uint32_t>(in) != sizeof(Real)) throw FormatError("EMB1 scalar width mismatch");
  try {
    store.model.validate();
  } catch (const ConfigError& e) {
    throw FormatError(std::string("EMB1 header: ") + e.what());
  }
  const auto count = binary::read<std::uint32_t>(in);
  if (count > kNumTables) throw FormatError("EMB1 table count out of range");
  for (std::uint32_t k = 0; k < count; ++k) {
    const auto id = binary::read<std::uint32_t>(in);
    if (id >= kNumTables || !model_uses(store.model.kind, static_cast<Table>(id)))
      throw FormatError("EMB1 table id not valid for model");
    const auto rows = binary::read<std::uint64_t>(in);
    const auto cols = binary::read<std::uint64_t>(in);
    const auto expected_rows =
        (id == static_cast<std::uint32_t>(Table::Entity) || id == static_cast<std::uint32_t>(Table::EntityProj))
            ? store.num_entities
            : store.num_relations;
    const auto expected_cols = id == static_cast<std::uint32_t>(Table::RelationMatrix) ? store.dim * store.dim
                                                                                       : store.dim;
    if (rows != expected_rows || cols != expected_cols) throw FormatError("EMB1 table shape mismatch");
    auto& t = store.table(static_cast<Table>(id));
    detail::allocate(t, rows, cols);
    binary::read_array(in, t.values.data(), static_cast<std::size_t>(t.values.size()));
    binary::read_array(in, t.accum.data(), static_cast<std::size_t>(t.accum.size()));
  }
  for (std::size_t i = 0; i < kNumTables; ++i)
    if (model_uses(store.model.kind, static_cast<Table>(i)) && !store.has(static_cast<Table>(i)))
      throw FormatError("EMB1 missing table " + std::string(to_string(static_cast<Table>(i))));
  return store;
}

template <typename Real>
void save_store(const std::string& path, const BasicEmbeddingStore<Real>& store) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  save_store(out, store);
}

template <typename Real = float>
BasicEmbeddingStore<Real> load_store(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open embedding store: " + path);
  return load_store<Real>(in);
}

namespace detail {

template <typename Real>
void write_number(std::ostream& out, Real v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  out.write(buf, res.ptr - buf);
}

}  // namespace detail

/// RFC 4180 quoting for a text field.
inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + '"';
}

/// `id,name,[label,]v0,...,v{d-1}` rows, one per table row. `name_of` may be
/// empty (names left blank); `label_of` adds a label column when set.
template <typename Real>
void export_csv(std::ostream& out, const RowMatrix<Real>& values,
                const std::function<std::string(std::uint64_t)>& name_of = {},
                const std::function<std::string(std::uint64_t)>& label_of = {}) {
  out << "id,name";
  if (label_of) out << ",source";
  for (Eigen::Index j = 0; j < values.cols(); ++j) out << ",v" << j;
  out << '\n';
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    const auto id = static_cast<std::uint64_t>(i);
    out << id << ',' << csv_field(name_of ? name_of(id) : std::string());
    if (label_of) out << ',' << csv_field(label_of(id));
    for (Eigen::Index j = 0; j < values.cols(); ++j) {
      out << ',';
      detail::write_number(out, values(i, j));
    }
    out << '\n';
  }
}

}  // namespace sumshine
