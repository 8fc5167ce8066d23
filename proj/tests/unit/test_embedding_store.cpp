// Copyright (c) 2026, The Sumshine Authors
// SPDX-License-Identifier: Apache-2.0

#include <catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "sumshine/embedding_store.hpp"

using namespace sumshine;

namespace {

ScoringModel model_of(ModelKind k) {
  ScoringModel m;
  m.kind = k;
  return m;
}

}  // namespace

TEST_CASE("initialisation is bounded, seeded and shaped per model", "[store]") {
  for (auto kind : kAllModelKinds) {
    const auto s = init_store<float>(model_of(kind), 30, 5, 8, 11);
    const float bound = 6.0f / std::sqrt(8.0f);
    CHECK(s.table(Table::Entity).values.cwiseAbs().maxCoeff() <= bound);
    CHECK(s.table(Table::Relation).values.rows() == 5);
    CHECK(s.table(Table::Entity).accum.isZero());
    for (std::size_t t = 0; t < kNumTables; ++t)
      CHECK(s.has(static_cast<Table>(t)) == model_uses(kind, static_cast<Table>(t)));
    CHECK(s == init_store<float>(model_of(kind), 30, 5, 8, 11));
    CHECK_FALSE(s == init_store<float>(model_of(kind), 30, 5, 8, 12));
  }
  const auto r = init_store<double>(model_of(ModelKind::TransR), 3, 2, 4, 1);
  const auto& m = r.table(Table::RelationMatrix).values;
  REQUIRE(m.cols() == 16);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) CHECK(std::abs(m(1, i * 4 + j) - (i == j ? 1.0 : 0.0)) <= 0.01);
  CHECK_THROWS_AS(init_store<float>(model_of(ModelKind::ComplEx), 3, 2, 5, 1), ConfigError);
}

TEST_CASE("adagrad follows the coupled-decay recurrence", "[store]") {
  auto store = init_store<double>(model_of(ModelKind::TransE), 4, 2, 3, 5);
  const auto before = store;
  OptimizerConfig cfg{0.1, 0.01, 1e-10};
  const double g_steps[3] = {0.2, -0.1, 0.05};

  long double p = before.table(Table::Entity).values(2, 1);
  long double a = 0.0L;
  for (double g_raw : g_steps) {
    auto grad = store.make_gradient();
    Eigen::Vector3d g = Eigen::Vector3d::Zero();
    g(1) = g_raw;
    grad.add(Table::Entity, 2, g);
    adagrad_step(store, grad, cfg);
    const long double gi = g_raw + 0.01L * p;
    a += gi * gi;
    p -= 0.1L * gi / (std::sqrt(a) + 1e-10L);
  }
  CHECK(std::abs(static_cast<double>(p) - store.table(Table::Entity).values(2, 1)) < 1e-15);
  CHECK(std::abs(static_cast<double>(a) - store.table(Table::Entity).accum(2, 1)) < 1e-15);
  // A touched row with zero gradient still decays; untouched rows are left alone.
  CHECK(store.table(Table::Entity).values(2, 0) != before.table(Table::Entity).values(2, 0));
  CHECK(store.table(Table::Entity).values.row(0) == before.table(Table::Entity).values.row(0));
  CHECK(store.table(Table::Relation).values == before.table(Table::Relation).values);
}

TEST_CASE("non-finite gradients are rejected before any update", "[store]") {
  auto store = init_store<float>(model_of(ModelKind::TransE), 4, 2, 3, 5);
  const auto before = store;
  auto grad = store.make_gradient();
  grad.add(Table::Entity, 0, Eigen::Vector3f(1.0f, 1.0f, 1.0f));
  grad.add(Table::Entity, 1, Eigen::Vector3f(1.0f, std::nanf(""), 1.0f));
  CHECK_THROWS_AS(adagrad_step(store, grad, OptimizerConfig{}), NumericError);
  CHECK(store == before);
}

TEST_CASE("sparse gradients accumulate, merge and iterate in table/row order", "[store]") {
  auto store = init_store<double>(model_of(ModelKind::TransD), 5, 3, 2, 1);
  auto a = store.make_gradient();
  a.add(Table::Relation, 2, Eigen::Vector2d(1, 2));
  a.add(Table::Entity, 4, Eigen::Vector2d(3, 4));
  a.add(Table::Entity, 4, Eigen::Vector2d(1, 1), 2.0);
  auto b = store.make_gradient();
  b.add(Table::Entity, 1, Eigen::Vector2d(1, 0));
  b.add(Table::Relation, 2, Eigen::Vector2d(1, 1));
  a.merge(b, -1.0);
  const auto& e = a.entries();
  REQUIRE(e.size() == 3);
  CHECK((e[0].table == Table::Entity && e[0].row == 1));
  CHECK((e[1].table == Table::Entity && e[1].row == 4));
  CHECK((e[2].table == Table::Relation && e[2].row == 2));
  CHECK(a.find(Table::Entity, 4)[0] == 5.0);
  CHECK(a.find(Table::Entity, 1)[0] == -1.0);
  CHECK(a.find(Table::Relation, 2)[1] == 1.0);
  CHECK(a.find(Table::Entity, 0) == nullptr);
  auto plain = init_store<double>(model_of(ModelKind::TransE), 5, 3, 2, 1).make_gradient();
  CHECK_THROWS(plain.row_span(Table::EntityProj, 0));
}

TEST_CASE("store files round trip exactly and reject corruption", "[store]") {
  for (auto kind : kAllModelKinds) {
    auto store = init_store<float>(model_of(kind), 7, 3, 4, 9);
    auto grad = store.make_gradient();
    grad.add(Table::Entity, 3, Eigen::Vector4f(0.1f, -0.2f, 0.3f, 0.4f));
    adagrad_step(store, grad, OptimizerConfig{});
    std::stringstream buf;
    save_store(buf, store);
    const auto bytes = buf.str();
    CHECK(load_store<float>(buf) == store);

    std::stringstream cut(bytes.substr(0, bytes.size() - 3));
    CHECK_THROWS_AS(load_store<float>(cut), FormatError);
    std::stringstream wide(bytes);
    CHECK_THROWS_AS(load_store<double>(wide), FormatError);
  }
  auto d = init_store<double>(model_of(ModelKind::ComplEx), 3, 2, 4, 1);
  std::stringstream buf;
  save_store(buf, d);
  CHECK(load_store<double>(buf) == d);

  std::stringstream bad("EMB2xxxx");
  CHECK_THROWS_AS(load_store<float>(bad), FormatError);
}

TEST_CASE("csv export writes names, labels and round-trippable numbers", "[store]") {
  auto store = init_store<float>(model_of(ModelKind::TransE), 2, 1, 3, 4);
  std::ostringstream out;
  export_csv(
      out, store.table(Table::Entity).values, [](std::uint64_t i) { return i == 0 ? std::string("a,b") : "c\"d"; },
      [](std::uint64_t) { return std::string("S"); });
  std::istringstream in(out.str());
  std::string header, row0, row1;
  std::getline(in, header);
  std::getline(in, row0);
  std::getline(in, row1);
  CHECK(header == "id,name,source,v0,v1,v2");
  CHECK(row0.rfind("0,\"a,b\",S,", 0) == 0);
  CHECK(row1.rfind("1,\"c\"\"d\",S,", 0) == 0);
  const auto last = row1.substr(row1.rfind(',') + 1);
  CHECK(std::stof(last) == store.table(Table::Entity).values(1, 2));
}
