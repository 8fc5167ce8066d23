// Copyright (c) 2026, The Sumshine Authors
// SPDX-License-Identifier: Apache-2.0

#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include "sumshine/evaluation.hpp"

using namespace sumshine;

namespace {

/// Rank by sorting: midpoint of the optimistic and pessimistic positions, rounded up.
std::size_t sorted_rank(double truth, std::vector<double> corrupted) {
  corrupted.push_back(truth);
  std::sort(corrupted.begin(), corrupted.end(), std::greater<>());
  const auto first = std::find(corrupted.begin(), corrupted.end(), truth) - corrupted.begin() + 1;
  const auto last = corrupted.rend() - std::find(corrupted.rbegin(), corrupted.rend(), truth);
  return static_cast<std::size_t>((first + last + 1) / 2);
}

/// Deterministic scorer: a fixed pseudo-random score per triple.
EdgeScorer hashed_scorer(int levels) {
  return [levels](std::span<const Triple> ts) {
    std::vector<double> out;
    for (const auto& t : ts) out.push_back(static_cast<double>(TripleHash{}(t) % static_cast<std::size_t>(levels)));
    return out;
  };
}

std::vector<EntityId> iota_ids(std::size_t n) {
  std::vector<EntityId> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = i;
  return v;
}

}  // namespace

TEST_CASE("rank_of agrees with a sort-based oracle including ties", "[evaluation]") {
  CHECK(rank_of(0.5, std::vector<double>{0.9, 0.1, 0.5, 0.5}) == 3);  // 1 + 1 + ceil(2/2)
  CHECK(rank_of(0.5, std::vector<double>{0.5}) == 2);
  CHECK(rank_of(1.0, std::vector<double>{}) == 1);
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> level(0, 5);
  for (int rep = 0; rep < 500; ++rep) {
    std::vector<double> c(1 + rng() % 20);
    for (auto& v : c) v = level(rng);
    const double truth = level(rng);
    REQUIRE(rank_of(truth, c) == sorted_rank(truth, c));
  }
}

TEST_CASE("rank_test_edges scores the whole pool when it is small", "[evaluation]") {
  const auto pool = iota_ids(30);
  const std::vector<Triple> test = {{1, 0, 2}, {7, 1, 4}, {29, 0, 0}};
  const auto scorer = hashed_scorer(7);
  RankingConfig cfg;
  cfg.n_negatives = 100;
  const auto res = rank_test_edges(scorer, test, pool, cfg);
  REQUIRE(res.head_ranks.size() == 3);
  for (std::size_t e = 0; e < test.size(); ++e) {
    for (int side = 0; side < 2; ++side) {
      std::vector<double> corrupted;
      for (auto c : pool) {
        Triple q = test[e];
        EntityId& slot = side == 0 ? q.head : q.tail;
        if (c == slot) continue;
        slot = c;
        corrupted.push_back(scorer(std::vector<Triple>{q})[0]);
      }
      const double truth = scorer(std::vector<Triple>{test[e]})[0];
      CHECK((side == 0 ? res.head_ranks : res.tail_ranks)[e] == sorted_rank(truth, corrupted));
    }
  }
  CHECK(std::all_of(res.candidates_per_query.begin(), res.candidates_per_query.end(),
                    [](std::size_t n) { return n == 29; }));
}

TEST_CASE("rank_test_edges samples distinct corruptions reproducibly", "[evaluation]") {
  const auto pool = iota_ids(500);
  const std::vector<Triple> test = {{3, 0, 9}};
  std::vector<std::vector<Triple>> seen;
  EdgeScorer recorder = [&](std::span<const Triple> ts) {
    seen.emplace_back(ts.begin(), ts.end());
    return std::vector<double>(ts.size(), 0.0);
  };
  RankingConfig cfg;
  cfg.n_negatives = 50;
  cfg.seed = 4;
  rank_test_edges(recorder, test, pool, cfg);
  REQUIRE(seen.size() == 2);
  std::set<EntityId> heads;
  for (std::size_t i = 1; i < seen[0].size(); ++i) {
    CHECK(seen[0][i].tail == 9);
    CHECK(seen[0][i].head != 3);
    heads.insert(seen[0][i].head);
  }
  CHECK(heads.size() == 50);
  auto first = seen;
  seen.clear();
  rank_test_edges(recorder, test, pool, cfg);
  CHECK(seen == first);
  cfg.seed = 5;
  seen.clear();
  rank_test_edges(recorder, test, pool, cfg);
  CHECK(seen != first);
}

TEST_CASE("filtered protocol drops known edges from the candidates", "[evaluation]") {
  const auto pool = iota_ids(20);
  const std::vector<Triple> test = {{0, 0, 1}};
  // Every corruption outranks the truth so removing k of them improves the rank by exactly k.
  EdgeScorer scorer = [](std::span<const Triple> ts) {
    std::vector<double> out(ts.size(), 1.0);
    out[0] = 0.0;
    return out;
  };
  std::unordered_set<Triple, TripleHash> known = {{0, 0, 1}, {5, 0, 1}, {6, 0, 1}, {0, 0, 7}};
  RankingConfig raw;
  RankingConfig filtered;
  filtered.filter = &known;
  const auto a = rank_test_edges(scorer, test, pool, raw);
  const auto b = rank_test_edges(scorer, test, pool, filtered);
  CHECK(a.head_ranks[0] == 20);
  CHECK(b.head_ranks[0] == 18);
  CHECK(b.tail_ranks[0] == 19);
  CHECK(b.candidates_per_query == std::vector<std::size_t>{17, 18});
}

TEST_CASE("metrics pool head and tail queries", "[evaluation]") {
  RankingResult r;
  r.head_ranks = {1, 2, 4};
  r.tail_ranks = {10};
  const auto m = metrics(r, {1, 3, 10});
  CHECK(m.queries == 4);
  CHECK(m.mrr == Catch::Approx((1.0 + 0.5 + 0.25 + 0.1) / 4));
  CHECK(m.mr == Catch::Approx(17.0 / 4));
  CHECK(m.hits.at(1) == 0.25);
  CHECK(m.hits.at(3) == 0.5);
  CHECK(m.hits.at(10) == 1.0);
  CHECK_THROWS(metrics(RankingResult{}));

  std::ostringstream csv;
  write_metrics_csv(csv, m);
  CHECK(csv.str().rfind("metric,value\nmrr,0.4625\nmr,4.25\n", 0) == 0);
  CHECK(to_json(m)["hits"]["3"] == 0.5);
}

TEST_CASE("an uninformative scorer reaches the random-matcher baseline", "[evaluation]") {
  // H_n / n with H_n ~ ln n + gamma + 1/(2n) - 1/(12 n^2).
  const double n = 1001;
  const double harmonic = std::log(n) + std::numbers::egamma + 1 / (2 * n) - 1 / (12 * n * n);
  CHECK(random_matcher_mrr(1001) == Catch::Approx(harmonic / n).epsilon(1e-9));
  CHECK(random_matcher_mrr(1) == 1.0);

  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  EdgeScorer noise = [&](std::span<const Triple> ts) {
    std::vector<double> out(ts.size());
    for (auto& v : out) v = u(rng);
    return out;
  };
  const auto pool = iota_ids(101);
  std::vector<Triple> test;
  for (std::uint64_t i = 0; i < 2000; ++i) test.push_back({i % 101, 0, (i * 7 + 3) % 101});
  RankingConfig cfg;
  cfg.n_negatives = 100;
  const auto m = metrics(rank_test_edges(noise, test, pool, cfg));
  // 4000 queries with rank uniform on 1..101: sd of the mean rank is about 29.2 / sqrt(4000) = 0.46.
  CHECK(std::abs(m.mr - 51.0) < 2.0);
  CHECK(std::abs(m.mrr - random_matcher_mrr(101)) < 0.004);
}

TEST_CASE("matcher examples pair each positive with m corruptions", "[evaluation]") {
  const auto ents = iota_ids(10);
  const std::vector<Triple> pos = {{0, 0, 1}, {2, 1, 3}};
  Rng rng(1);
  const auto ex = matcher_examples(pos, ents, 3, rng);
  REQUIRE(ex.triples.size() == 8);
  CHECK(ex.labels == std::vector<std::size_t>{1, 0, 0, 0, 1, 0, 0, 0});
  CHECK(ex.triples[0] == pos[0]);
  CHECK(ex.triples[4] == pos[1]);
  for (std::size_t i : {1, 2, 3}) CHECK(((ex.triples[i].head == 0) != (ex.triples[i].tail == 1)));
}

TEST_CASE("a trained matcher beats random on a learnable rule", "[evaluation]") {
  // Entity i sits on the unit circle at angle 2*pi*(i mod 5)/5; relation 0 maps cluster c to c+1.
  const std::size_t n = 60;
  ScoringModel model;
  auto store = init_store<double>(model, n, 1, 4, 1);
  auto& ent = store.table(Table::Entity).values;
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g(0.0, 0.05);
  for (std::size_t i = 0; i < n; ++i) {
    const double a = 2 * std::numbers::pi * static_cast<double>(i % 5) / 5.0;
    ent.row(static_cast<Eigen::Index>(i)) << std::cos(a) + g(rng), std::sin(a) + g(rng), g(rng), g(rng);
  }
  std::vector<Triple> train, test;
  for (std::size_t h = 0; h < n; ++h)
    for (std::size_t t = 0; t < n; ++t)
      if (t % 5 == (h + 1) % 5) (rng() % 4 == 0 ? test : train).push_back({h, 0, t});
  const auto ents = iota_ids(n);
  MatcherConfig cfg;
  cfg.hidden = {32};
  cfg.negatives_per_positive = 2;
  cfg.fit.epochs = 40;
  cfg.fit.batch_size = 64;
  cfg.fit.optimizer.learning_rate = 0.05;
  cfg.seed = 3;
  const auto mlp = train_matcher(store, train, ents, cfg);
  RankingConfig rc;
  rc.n_negatives = n;
  const auto m = metrics(rank_test_edges(mlp, store, std::span<const Triple>(test).first(100), ents, rc));
  // Only 12 of 60 entities share the true cluster; a perfect matcher ranks around 6.
  CHECK(m.mrr > 3 * random_matcher_mrr(n));
  CHECK(m.mr < 12.0);
  CHECK_THROWS(train_matcher(store, std::vector<Triple>{}, ents, cfg));
}

TEST_CASE("node classification separates well-clustered embeddings", "[evaluation]") {
  const std::size_t n = 300;
  ScoringModel model;
  auto store = init_store<float>(model, n, 1, 3, 1);
  auto& ent = store.table(Table::Entity).values;
  std::mt19937_64 rng(5);
  std::normal_distribution<float> g(0.0f, 0.3f);
  std::vector<LabeledNode> train, test;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = i % 3;
    ent.row(static_cast<Eigen::Index>(i)) << (c == 0 ? 2.0f : 0.0f) + g(rng), (c == 1 ? 2.0f : 0.0f) + g(rng),
        (c == 2 ? 2.0f : 0.0f) + g(rng);
    (i < 240 ? train : test).push_back({i, c});
  }
  ClassifierConfig cfg;
  cfg.hidden = {16};
  cfg.fit.epochs = 60;
  cfg.fit.batch_size = 32;
  cfg.fit.optimizer.learning_rate = 0.05;
  const auto res = node_classification(store, train, test, 3, cfg);
  CHECK(res.total == 60);
  CHECK(res.accuracy > 0.9);
  CHECK(res.warnings.empty());

  std::vector<LabeledNode> two(train.begin(), train.end());
  std::erase_if(two, [](const LabeledNode& x) { return x.label == 2; });
  const auto partial = node_classification(store, two, test, 3, cfg);
  REQUIRE(partial.warnings.size() == 1);
  CHECK(partial.warnings[0].find("class 2") != std::string::npos);

  std::vector<LabeledNode> bad = {{0, 5}};
  CHECK_THROWS_AS(node_classification(store, bad, test, 3, cfg), std::out_of_range);
  CHECK_THROWS(node_classification(store, std::vector<LabeledNode>{}, test, 3, cfg));
}

TEST_CASE("divergence report covers every source pair", "[evaluation]") {
  const auto manifest = make_manifest({{"a", {{"x", "r", "y"}, {"y", "r", "z"}}},
                                       {"b", {{"u", "s", "v"}, {"v", "s", "w"}}},
                                       {"c", {{"x", "t", "w"}, {"p", "t", "q"}}}});
  const Hin hin = build_hin(manifest);
  ScoringModel model;
  const auto store = init_store<double>(model, hin.vocab.num_entities(), hin.vocab.num_relations(), 4, 9);
  const auto rows = divergence_report(store, hin, 8);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].source_a == "a");
  CHECK(rows[0].source_b == "b");
  CHECK(rows[2].source_a == "b");
  CHECK(rows[1].js == hist_js(source_entity_rows(store, hin, 0), source_entity_rows(store, hin, 2), 8));
  CHECK(source_entity_rows(store, hin, 2).rows() == 4);
  for (const auto& r : rows) CHECK(r.js >= 0.0);

  std::ostringstream csv;
  write_divergence_csv(csv, rows);
  CHECK(csv.str().rfind("source_a,source_b,js\na,b,", 0) == 0);
  CHECK_THROWS_AS(divergence_report(store, build_hin(make_manifest({{"a", {{"x", "r", "y"}}}}))), ConfigError);
}
