// Copyright (c) 2026, The Sumshine Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iomanip>
#include <iterator>
#include <map>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "sumshine/alignment.hpp"
#include "sumshine/embedding_store.hpp"
#include "sumshine/graph.hpp"
#include "sumshine/neuralnet.hpp"
#include "sumshine/rng.hpp"
#include "sumshine/sampling.hpp"

namespace sumshine {

// Link prediction -------------------------------------------------------------

struct MatcherConfig {
  std::vector<std::size_t> hidden = {200, 200};
  std::size_t negatives_per_positive = 1;  // m
  FitConfig fit{};
  std::uint64_t seed = 0;
};

/// Concatenated [h, r, t] embedding rows, one per triple.
template <typename Real>
Matrix<Real> edge_features(const BasicEmbeddingStore<Real>& store, std::span<const Triple> triples) {
  const auto d = static_cast<Eigen::Index>(store.dim);
  Matrix<Real> x(static_cast<Eigen::Index>(triples.size()), 3 * d);
  const auto& ent = store.table(Table::Entity).values;
  const auto& rel = store.table(Table::Relation).values;
  for (std::size_t i = 0; i < triples.size(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    x.row(row).segment(0, d) = ent.row(static_cast<Eigen::Index>(triples[i].head));
    x.row(row).segment(d, d) = rel.row(static_cast<Eigen::Index>(triples[i].relation));
    x.row(row).segment(2 * d, d) = ent.row(static_cast<Eigen::Index>(triples[i].tail));
  }
  return x;
}

/// Labeled matcher training set: every positive followed by its m corruptions
/// (label 1 = link, 0 = no link).
struct MatcherExamples {
  std::vector<Triple> triples;
  std::vector<std::size_t> labels;
};

inline MatcherExamples matcher_examples(std::span<const Triple> positives, std::span<const EntityId> entities,
                                        std::size_t m, Rng& rng) {
  MatcherExamples ex;
  SamplerConfig scfg;
  scfg.negatives_per_positive = m;
  for (const auto& p : positives) {
    ex.triples.push_back(p);
    ex.labels.push_back(1);
    for (const auto& n : corrupt(p, entities, m, scfg, rng)) {
      ex.triples.push_back(n);
      ex.labels.push_back(0);
    }
  }
  return ex;
}

/// Binary link classifier over frozen embeddings, trained on one source's edges
/// plus m within-source corruptions per edge.
template <typename Real>
BasicMlp<Real> train_matcher(const BasicEmbeddingStore<Real>& store, std::span<const Triple> train_edges,
                             std::span<const EntityId> train_entities, const MatcherConfig& cfg) {
  if (train_edges.empty()) throw std::invalid_argument("train_matcher: empty training source");
  Rng rng = make_rng(cfg.seed, {0x6d61746368});
  const auto ex = matcher_examples(train_edges, train_entities, cfg.negatives_per_positive, rng);
  MlpSpec spec;
  spec.layer_dims.push_back(3 * store.dim);
  spec.layer_dims.insert(spec.layer_dims.end(), cfg.hidden.begin(), cfg.hidden.end());
  spec.layer_dims.push_back(2);
  spec.seed = cfg.seed;
  BasicMlp<Real> mlp(spec);
  fit(mlp, edge_features(store, ex.triples), one_hot<Real>(ex.labels, 2), cfg.fit, rng);
  return mlp;
}

/// Link probability for a batch of triples; what ranking consumes.
using EdgeScorer = std::function<std::vector<double>(std::span<const Triple>)>;

template <typename Real>
EdgeScorer matcher_scorer(const BasicMlp<Real>& matcher, const BasicEmbeddingStore<Real>& store) {
  return [&matcher, &store](std::span<const Triple> triples) {
    const auto probs = forward(matcher, edge_features(store, triples));
    std::vector<double> out(triples.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<double>(probs(static_cast<Eigen::Index>(i), 1));
    return out;
  };
}

struct RankingResult {
  std::vector<std::size_t> head_ranks;
  std::vector<std::size_t> tail_ranks;
  std::vector<std::size_t> candidates_per_query;  // corruptions scored, head then tail per test edge

  std::size_t size() const noexcept { return head_ranks.size() + tail_ranks.size(); }
};

/// 1 + #(scores strictly above the true edge) + ceil(#ties / 2).
inline std::size_t rank_of(double true_score, std::span<const double> corrupted) {
  std::size_t greater = 0, ties = 0;
  for (double s : corrupted) {
    if (s > true_score)
      ++greater;
    else if (s == true_score)
      ++ties;
  }
  return 1 + greater + (ties + 1) / 2;
}

struct RankingConfig {
  std::size_t n_negatives = 1000;
  std::uint64_t seed = 0;
  /// When set, corruptions that are themselves known edges are dropped (filtered protocol).
  const std::unordered_set<Triple, TripleHash>* filter = nullptr;
};

/// Ranks every test edge against n corruptions of its head and then of its
/// tail. Replacement entities are drawn without replacement from `candidates`
/// minus the true entity; smaller pools are used whole.
inline RankingResult rank_test_edges(const EdgeScorer& scorer, std::span<const Triple> test_edges,
                                     std::span<const EntityId> candidates, const RankingConfig& cfg) {
  RankingResult result;
  std::vector<EntityId> pool;
  std::vector<EntityId> chosen;
  std::vector<Triple> queries;
  for (std::size_t e = 0; e < test_edges.size(); ++e) {
    const Triple& truth = test_edges[e];
    for (int side = 0; side < 2; ++side) {
      const EntityId replaced = side == 0 ? truth.head : truth.tail;
      pool.clear();
      for (auto c : candidates)
        if (c != replaced) pool.push_back(c);
      chosen.clear();
      if (pool.size() <= cfg.n_negatives) {
        chosen = pool;
      } else {
        Rng rng = make_rng(cfg.seed, {e, static_cast<std::uint64_t>(side)});
        std::sample(pool.begin(), pool.end(), std::back_inserter(chosen), cfg.n_negatives, rng);
      }
      queries.clear();
      queries.push_back(truth);
      for (auto c : chosen) {
        Triple q = truth;
        (side == 0 ? q.head : q.tail) = c;
        if (cfg.filter && cfg.filter->contains(q)) continue;
        queries.push_back(q);
      }
      const auto scores = scorer(queries);
      const auto rank = rank_of(scores[0], std::span<const double>(scores).subspan(1));
      (side == 0 ? result.head_ranks : result.tail_ranks).push_back(rank);
      result.candidates_per_query.push_back(queries.size() - 1);
    }
  }
  return result;
}

template <typename Real>
RankingResult rank_test_edges(const BasicMlp<Real>& matcher, const BasicEmbeddingStore<Real>& store,
                              std::span<const Triple> test_edges, std::span<const EntityId> candidates,
                              const RankingConfig& cfg) {
  return rank_test_edges(matcher_scorer(matcher, store), test_edges, candidates, cfg);
}

struct Metrics {
  double mrr = 0.0;
  double mr = 0.0;
  std::map<std::size_t, double> hits;
  std::size_t queries = 0;
};

/// MRR, MR and Hits@n over head and tail queries pooled together.
inline Metrics metrics(const RankingResult& r, const std::vector<std::size_t>& hits_ns = {1, 3, 10}) {
  if (r.size() == 0) throw std::invalid_argument("metrics: empty ranking result");
  Metrics m;
  m.queries = r.size();
  std::map<std::size_t, std::size_t> hit_counts;
  for (auto n : hits_ns) hit_counts[n] = 0;
  for (const auto* ranks : {&r.head_ranks, &r.tail_ranks})
    for (auto rank : *ranks) {
      m.mrr += 1.0 / static_cast<double>(rank);
      m.mr += static_cast<double>(rank);
      for (auto& [n, c] : hit_counts)
        if (rank <= n) ++c;
    }
  const auto q = static_cast<double>(m.queries);
  m.mrr /= q;
  m.mr /= q;
  for (const auto& [n, c] : hit_counts) m.hits[n] = static_cast<double>(c) / q;
  return m;
}

inline nlohmann::json to_json(const Metrics& m) {
  nlohmann::json j;
  j["mrr"] = m.mrr;
  j["mr"] = m.mr;
  j["queries"] = m.queries;
  nlohmann::json hits = nlohmann::json::object();
  for (const auto& [n, v] : m.hits) hits[std::to_string(n)] = v;
  j["hits"] = hits;
  return j;
}

inline void write_metrics_csv(std::ostream& out, const Metrics& m) {
  out << "metric,value\n" << std::setprecision(10);
  out << "mrr," << m.mrr << "\nmr," << m.mr << '\n';
  for (const auto& [n, v] : m.hits) out << "hits@" << n << ',' << v << '\n';
}

/// Expected MRR of a matcher whose scores carry no information: rank uniform on 1..pool.
inline double random_matcher_mrr(std::size_t pool) {
  double s = 0.0;
  for (std::size_t r = 1; r <= pool; ++r) s += 1.0 / static_cast<double>(r);
  return s / static_cast<double>(pool);
}

// Node classification ---------------------------------------------------------

struct LabeledNode {
  EntityId entity = 0;
  std::size_t label = 0;
};

struct ClassifierConfig {
  std::vector<std::size_t> hidden = {200};
  FitConfig fit{};
  std::uint64_t seed = 0;
};

struct ClassificationResult {
  double accuracy = 0.0;
  std::size_t correct = 0;
  std::size_t total = 0;
  std::vector<std::string> warnings;
};

template <typename Real>
Matrix<Real> node_features(const BasicEmbeddingStore<Real>& store, std::span<const LabeledNode> nodes) {
  Matrix<Real> x(static_cast<Eigen::Index>(nodes.size()), static_cast<Eigen::Index>(store.dim));
  for (std::size_t i = 0; i < nodes.size(); ++i)
    x.row(static_cast<Eigen::Index>(i)) = store.entity(nodes[i].entity);
  return x;
}

/// Trains an MLP classifier on entity embeddings and reports test accuracy.
template <typename Real>
ClassificationResult node_classification(const BasicEmbeddingStore<Real>& store, std::span<const LabeledNode> train,
                                         std::span<const LabeledNode> test, std::size_t classes,
                                         const ClassifierConfig& cfg) {
  if (classes < 1) throw ConfigError("node_classification: need at least one class");
  if (train.empty()) throw std::invalid_argument("node_classification: empty training set");
  ClassificationResult res;
  std::vector<bool> seen(classes, false);
  std::vector<std::size_t> labels;
  for (const auto& n : train) {
    if (n.label >= classes || n.entity >= store.num_entities)
      throw std::out_of_range("node_classification: label or entity out of range");
    seen[n.label] = true;
    labels.push_back(n.label);
  }
  for (std::size_t c = 0; c < classes; ++c)
    if (!seen[c]) res.warnings.push_back("class " + std::to_string(c) + " absent from training set");

  MlpSpec spec;
  spec.layer_dims.push_back(store.dim);
  spec.layer_dims.insert(spec.layer_dims.end(), cfg.hidden.begin(), cfg.hidden.end());
  spec.layer_dims.push_back(classes);
  spec.seed = cfg.seed;
  BasicMlp<Real> mlp(spec);
  Rng rng = make_rng(cfg.seed, {0x6e6f6465});
  fit(mlp, node_features(store, train), one_hot<Real>(labels, classes), cfg.fit, rng);

  res.total = test.size();
  if (test.empty()) return res;
  const auto pred = predict(mlp, node_features(store, test));
  for (std::size_t i = 0; i < test.size(); ++i)
    if (pred[i] == test[i].label) ++res.correct;
  res.accuracy = static_cast<double>(res.correct) / static_cast<double>(res.total);
  return res;
}

// Source divergence -------------------------------------------------------------

struct DivergenceRow {
  std::string source_a;
  std::string source_b;
  double js = 0.0;
};

template <typename Real>
RowMatrix<Real> source_entity_rows(const BasicEmbeddingStore<Real>& store, const Hin& hin, std::size_t source) {
  const auto& ids = hin.per_source_entities[source];
  RowMatrix<Real> rows(static_cast<Eigen::Index>(ids.size()), static_cast<Eigen::Index>(store.dim));
  for (std::size_t i = 0; i < ids.size(); ++i) rows.row(static_cast<Eigen::Index>(i)) = store.entity(ids[i]);
  return rows;
}

/// hist_js between the entity embeddings of every unordered source pair
/// (per-dimension histograms, averaged over dimensions).
template <typename Real>
std::vector<DivergenceRow> divergence_report(const BasicEmbeddingStore<Real>& store, const Hin& hin,
                                             std::size_t bins = 64, double smoothing = 1e-8) {
  if (hin.num_sources() < 2) throw ConfigError("divergence_report needs at least two sources");
  std::vector<RowMatrix<Real>> rows;
  for (std::size_t i = 0; i < hin.num_sources(); ++i) rows.push_back(source_entity_rows(store, hin, i));
  std::vector<DivergenceRow> out;
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = i + 1; j < rows.size(); ++j)
      out.push_back({hin.source_names[i], hin.source_names[j], hist_js(rows[i], rows[j], bins, smoothing)});
  return out;
}

inline void write_divergence_csv(std::ostream& out, const std::vector<DivergenceRow>& rows) {
  out << "source_a,source_b,js\n" << std::setprecision(12);
  for (const auto& r : rows) out << r.source_a << ',' << r.source_b << ',' << r.js << '\n';
}

}  // namespace sumshine
