// Copyright (c) 2026, The Sumshine Authors
// SPDX-License-Identifier: Apache-2.0

#include <catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <map>

#include "sumshine/trainer.hpp"
#include "sumshine/synthetic.hpp"
#include "support/finite_difference.hpp"
#include "support/reference_trainer.hpp"

using namespace sumshine;
using testing::ReferenceTrainer;
using testing::rows_of;
namespace fs = std::filesystem;

namespace {

Hin toy_graph(std::uint64_t seed = 1) {
  SyntheticSpec spec;
  spec.core_entities = 20;
  spec.dense_only_entities = 40;
  spec.sparse_only_entities = 20;
  spec.dense_edges = 300;
  spec.sparse_edges = 60;
  spec.clusters = 5;
  spec.seed = seed;
  return build_hin(make_synthetic_graph(spec).manifest);
}

TrainConfig toy_config(AlignmentKind kind = AlignmentKind::None) {
  TrainConfig cfg;
  cfg.dim = 8;
  cfg.epochs = 4;
  cfg.seed = 5;
  cfg.sampler.batch_size = 64;
  cfg.sampler.negatives_per_positive = 2;
  cfg.optimizer.learning_rate = 0.05;
  cfg.alignment.kind = kind;
  cfg.alignment.discriminator_hidden = {16};
  return cfg;
}

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("sumshine_trainer_" + name);
  fs::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("fixed seed gives bitwise-identical stores, with and without threads", "[trainer]") {
  const Hin hin = toy_graph();
  for (auto kind : {AlignmentKind::None, AlignmentKind::MMD, AlignmentKind::Adversarial}) {
    auto cfg = toy_config(kind);
    const auto a = train<float>(hin, cfg);
    const auto b = train<float>(hin, cfg);
    CHECK(a.store == b.store);
    cfg.threads = 2;
    CHECK(train<float>(hin, cfg).store == a.store);
    cfg.threads = 1;
    cfg.seed = 6;
    CHECK_FALSE(train<float>(hin, cfg).store == a.store);
  }
}

TEST_CASE("resuming from a checkpoint reproduces the uninterrupted run", "[trainer]") {
  const Hin hin = toy_graph();
  for (auto kind : {AlignmentKind::None, AlignmentKind::JS, AlignmentKind::Adversarial}) {
    auto cfg = toy_config(kind);
    cfg.epochs = 6;
    cfg.checkpoint_every = 2;
    const auto full = train<float>(hin, cfg);

    const auto dir = fresh_dir(std::string(to_string(kind)));
    TrainOptions first;
    first.checkpoint_dir = dir;
    first.stop_after = 3;  // interrupted after epoch 3; last checkpoint is epoch 2
    const auto part = train<float>(hin, cfg, first);
    CHECK(part.checkpoints.size() == 1);
    CHECK(latest_checkpoint(dir) == 2u);

    TrainOptions second;
    second.checkpoint_dir = dir;
    second.resume = true;
    const auto resumed = train<float>(hin, cfg, second);
    CHECK(resumed.resumed_from == 2);
    CHECK(resumed.store == full.store);
    if (kind == AlignmentKind::Adversarial) CHECK(*resumed.discriminator == *full.discriminator);
    CHECK(latest_checkpoint(dir) == 6u);

    auto other = cfg;
    other.optimizer.learning_rate = 0.01;
    CHECK_THROWS_AS(train<float>(hin, other, second), ConfigError);
    auto longer = cfg;
    longer.epochs = 8;  // extending the epoch budget is allowed
    CHECK(train<float>(hin, longer, second).resumed_from == 6);
    fs::remove_all(dir);
  }
}

TEST_CASE("kind=none matches an independent margin-loss reference for 10 steps", "[trainer]") {
  const Hin hin = toy_graph(3);
  for (auto model : {ModelKind::TransE, ModelKind::DistMult}) {
    auto cfg = toy_config();
    cfg.model.kind = model;
    BasicTrainer<double> trainer(hin, cfg);
    const auto s0 = trainer.store();
    ReferenceTrainer ref{model, cfg.model.margin, cfg.optimizer,
                         rows_of(s0.table(Table::Entity).values), rows_of(s0.table(Table::Relation).values),
                         rows_of(s0.table(Table::Entity).accum), rows_of(s0.table(Table::Relation).accum)};
    const Sampler sampler(hin, cfg.sampler);
    for (std::uint64_t round = 0; round < 10; ++round) {
      trainer.train_round(round);
      ref.round(sampler.sample_round(cfg.seed, round));
    }
    double worst = 0;
    const auto& ent = trainer.store().table(Table::Entity).values;
    const auto& rel = trainer.store().table(Table::Relation).values;
    for (Eigen::Index i = 0; i < ent.rows(); ++i)
      for (Eigen::Index k = 0; k < ent.cols(); ++k) worst = std::max(worst, std::abs(ent(i, k) - ref.ent[i][k]));
    for (Eigen::Index i = 0; i < rel.rows(); ++i)
      for (Eigen::Index k = 0; k < rel.cols(); ++k) worst = std::max(worst, std::abs(rel(i, k) - ref.rel[i][k]));
    INFO(to_string(model));
    CHECK(worst <= 1e-12);
    CHECK((ent - s0.table(Table::Entity).values).cwiseAbs().maxCoeff() > 1e-3);
  }
}

TEST_CASE("similarity loss gradient matches central differences", "[trainer]") {
  const Hin hin = toy_graph();
  auto cfg = toy_config();
  cfg.model.kind = ModelKind::TransD;
  cfg.model.norm = 2;
  BasicTrainer<double> trainer(hin, cfg);
  auto store = trainer.store();
  const Sampler sampler(hin, cfg.sampler);
  const auto batch = sampler.sample_source(0, 1, 0);
  auto grad = store.make_gradient();
  similarity_loss(store, batch, 1.0, grad);
  std::mt19937_64 rng(3);
  double worst = 0;
  for (int probe = 0; probe < 40; ++probe) {
    const auto& t = batch.positives[rng() % batch.positives.size()];
    const Table table = rng() % 2 ? Table::Entity : Table::EntityProj;
    const auto row = rng() % 2 ? t.head : t.tail;
    const auto c = static_cast<Eigen::Index>(rng() % cfg.dim);
    auto dummy = store.make_gradient();
    const double numeric = testing::central_difference(
        [&] { return similarity_loss(store, batch, 1.0, dummy); }, store.table(table).values(row, c));
    const double* g = grad.find(table, row);
    worst = std::max(worst, testing::relative_error(g ? g[c] : 0.0, numeric));
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("alignment on a single source warns and falls back to plain training", "[trainer]") {
  SourceManifest m;
  m["only"] = {{"a", "r", "b"}, {"b", "r", "c"}, {"c", "r", "a"}, {"a", "s", "c"}};
  const Hin hin = build_hin(m);
  auto cfg = toy_config(AlignmentKind::MMD);
  cfg.alignment.lambda = 10.0;
  const auto aligned = train<float>(hin, cfg);
  REQUIRE(aligned.warnings.size() == 1);
  CHECK(aligned.warnings[0].find("fewer than two sources") != std::string::npos);
  cfg.alignment.kind = AlignmentKind::None;
  CHECK(train<float>(hin, cfg).store == aligned.store);
}

TEST_CASE("training reduces the similarity loss", "[trainer]") {
  const Hin hin = toy_graph();
  auto cfg = toy_config();
  cfg.epochs = 30;
  const auto r = train<float>(hin, cfg);
  REQUIRE(r.log.size() == 30);
  CHECK(r.log.back().sim_loss < 0.5 * r.log.front().sim_loss);
  CHECK(r.log.back().epoch == 30);
}

TEST_CASE("adversarial alignment trains the discriminator and reports both losses", "[trainer]") {
  const Hin hin = toy_graph();
  auto cfg = toy_config(AlignmentKind::Adversarial);
  const auto r = train<float>(hin, cfg);
  REQUIRE(r.discriminator.has_value());
  CHECK(r.discriminator->output_dim() == 2);
  CHECK(r.log.back().disc_loss > 0.0);
  CHECK(r.log.back().align_loss > 0.0);

  cfg.alignment.adversarial_target = AdversarialTarget::Flip;
  CHECK_NOTHROW(train<float>(hin, cfg));
  SourceManifest three;
  three["a"] = {{"x", "r", "y"}};
  three["b"] = {{"x", "s", "y"}};
  three["c"] = {{"x", "t", "y"}};
  CHECK_THROWS_AS(BasicTrainer<float>(build_hin(three), cfg), ConfigError);
}

TEST_CASE("non-finite parameters abort the round with a diagnostic", "[trainer]") {
  const Hin hin = toy_graph();
  BasicTrainer<float> trainer(hin, toy_config());
  trainer.store().table(Table::Entity).values.setConstant(std::numeric_limits<float>::infinity());
  try {
    trainer.train_round(0);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("round 0") != std::string::npos);
  }
}

TEST_CASE("invalid training configurations are rejected", "[trainer]") {
  const Hin hin = toy_graph();
  auto cfg = toy_config();
  cfg.epochs = 0;
  CHECK_THROWS_AS(BasicTrainer<float>(hin, cfg), ConfigError);
  cfg = toy_config();
  cfg.model.kind = ModelKind::ComplEx;
  cfg.dim = 7;
  CHECK_THROWS_AS(BasicTrainer<float>(hin, cfg), ConfigError);
  cfg = toy_config();
  auto store = init_store<float>(cfg.model, 3, 1, cfg.dim, 1);
  CHECK_THROWS_AS(BasicTrainer<float>(hin, cfg, store), ConfigError);
}
