// Copyright (c) 2026, The Sumshine Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "sumshine/config.hpp"
#include "sumshine/evaluation.hpp"
#include "sumshine/graph.hpp"
#include "sumshine/trainer.hpp"

namespace sumshine {

namespace fs = std::filesystem;

/// Where a command reads from and writes to.
struct CommandContext {
  RunConfig config;
  fs::path out_dir;
  std::string command;
  std::string grid_label;
  std::optional<fs::path> store_path;  // evaluate/report/export; default <out>/final.emb
  std::ostream* log = &std::cerr;
};

inline void write_json(const fs::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

inline void write_provenance(const CommandContext& ctx) {
  nlohmann::json j;
  j["version"] = SUMSHINE_VERSION;
  j["command"] = ctx.command;
  j["seed"] = ctx.config.seed;
  j["threads"] = ctx.config.threads;
  j["grid_point"] = ctx.grid_label;
  j["config"] = tree_to_json(ctx.config.raw);
  j["train_config"] = to_json(ctx.config.train);
  if (ctx.store_path) j["store"] = ctx.store_path->string();
  write_json(ctx.out_dir / "run.json", j);
}

inline fs::path store_path_of(const CommandContext& ctx) {
  return ctx.store_path ? *ctx.store_path : ctx.out_dir / "final.emb";
}

inline EmbeddingStore load_store_for(const CommandContext& ctx, const Hin& hin) {
  const auto path = store_path_of(ctx);
  if (!fs::exists(path)) throw ParseError("embedding store not found: " + path.string());
  auto store = load_store<float>(path.string());
  if (store.num_entities != hin.vocab.num_entities() || store.num_relations != hin.vocab.num_relations())
    throw FormatError("embedding store " + path.string() + " does not match the dataset");
  return store;
}

// prepare ---------------------------------------------------------------------

inline int run_prepare(const CommandContext& ctx) {
  const Hin hin = load_or_build_hin(ctx.config);
  fs::create_directories(ctx.out_dir);
  save_hin((ctx.out_dir / "hin.bin").string(), hin);
  std::ofstream stats_out(ctx.out_dir / "stats.csv");
  write_stats_csv(stats_out, stats(hin));
  write_provenance(ctx);
  for (const auto& row : stats(hin))
    *ctx.log << row.name << ": " << row.entities << " entities, " << row.relations << " relations, " << row.edges
             << " edges\n";
  return 0;
}

// train -----------------------------------------------------------------------

inline int run_train(const CommandContext& ctx) {
  const Hin hin = load_or_build_hin(ctx.config);
  fs::create_directories(ctx.out_dir);
  write_provenance(ctx);
  TrainOptions opts;
  opts.checkpoint_dir = ctx.out_dir / "checkpoints";
  opts.resume = ctx.config.resume;
  const auto result = train<float>(hin, ctx.config.train, opts);
  for (const auto& w : result.warnings) *ctx.log << "warning: " << w << '\n';
  if (result.resumed_from > 0) *ctx.log << "resumed from epoch " << result.resumed_from << '\n';
  save_store((ctx.out_dir / "final.emb").string(), result.store);
  if (result.discriminator) save_mlp((ctx.out_dir / "final.disc").string(), *result.discriminator);
  std::ofstream log_out(ctx.out_dir / "log.csv");
  write_log_csv(log_out, result.log);
  if (!result.log.empty()) {
    const auto& last = result.log.back();
    *ctx.log << "epoch " << last.epoch << ": sim " << last.sim_loss << ", align " << last.align_loss << '\n';
  }
  return 0;
}

// evaluate --------------------------------------------------------------------

struct LabelFile {
  std::vector<std::pair<EntityId, std::string>> rows;
  std::size_t skipped = 0;
};

/// `entity<TAB>class` lines; entities absent from the vocabulary are skipped and counted.
inline LabelFile read_labels(const std::string& path, const Vocab& vocab) {
  LabelFile out;
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open label file: " + path);
  for (const auto& [entity, label] : parse_type_file(in, path)) {
    if (auto id = vocab.entities.find(entity))
      out.rows.emplace_back(*id, label);
    else
      ++out.skipped;
  }
  return out;
}

inline nlohmann::json classify_nodes(const CommandContext& ctx, const EmbeddingStore& store, const Hin& hin) {
  const auto& e = ctx.config.evaluation;
  const auto labels = read_labels(ctx.config.resolve(*e.labels_path).string(), hin.vocab);
  if (labels.rows.empty()) throw ConfigError("label file has no entity present in the dataset");
  std::map<std::string, std::size_t> classes;
  for (const auto& [id, name] : labels.rows) classes.emplace(name, 0);
  std::size_t next = 0;
  for (auto& [name, idx] : classes) idx = next++;

  std::vector<LabeledNode> nodes;
  for (const auto& [id, name] : labels.rows) nodes.push_back({id, classes.at(name)});
  Rng rng = make_rng(e.seed, {0x6c61});
  std::shuffle(nodes.begin(), nodes.end(), rng);
  auto n_train = static_cast<std::size_t>(e.label_train_fraction * static_cast<double>(nodes.size()));
  n_train = std::clamp<std::size_t>(n_train, 1, nodes.size());
  const std::span<const LabeledNode> all(nodes);
  const auto res = node_classification(store, all.first(n_train), all.subspan(n_train), classes.size(),
                                       e.classifier);
  for (const auto& w : res.warnings) *ctx.log << "warning: " << w << '\n';
  nlohmann::json j;
  j["accuracy"] = res.accuracy;
  j["correct"] = res.correct;
  j["test"] = res.total;
  j["train"] = n_train;
  j["classes"] = classes.size();
  j["skipped_unknown_entities"] = labels.skipped;
  j["warnings"] = res.warnings;
  return j;
}

inline int run_evaluate(const CommandContext& ctx) {
  const auto& e = ctx.config.evaluation;
  const Hin hin = load_or_build_hin(ctx.config);
  const auto store = load_store_for(ctx, hin);
  fs::create_directories(ctx.out_dir);
  write_provenance(ctx);

  nlohmann::json report;
  if (!e.train_source.empty()) {
    const auto a = hin.source_index(e.train_source);
    const auto b = hin.source_index(e.test_source);
    if (!a) throw ConfigError("unknown source in arrow: " + e.train_source);
    if (!b) throw ConfigError("unknown source in arrow: " + e.test_source);
    const auto matcher = train_matcher(store, std::span<const Triple>(hin.sources[*a]),
                                       std::span<const EntityId>(hin.per_source_entities[*a]), e.matcher);
    std::vector<Triple> test = hin.sources[*b];
    if (e.max_test_edges > 0 && test.size() > e.max_test_edges) {
      std::vector<Triple> subset;
      Rng rng = make_rng(e.seed, {0x7465});
      std::sample(test.begin(), test.end(), std::back_inserter(subset), e.max_test_edges, rng);
      test = std::move(subset);
    }
    std::unordered_set<Triple, TripleHash> known;
    RankingConfig rcfg;
    rcfg.n_negatives = e.n_negatives;
    rcfg.seed = e.seed;
    if (e.filtered) {
      for (const auto& src : hin.sources) known.insert(src.begin(), src.end());
      rcfg.filter = &known;
    }
    const auto& candidates = hin.per_source_entities[*b];
    const auto ranks = rank_test_edges(matcher, store, std::span<const Triple>(test),
                                       std::span<const EntityId>(candidates), rcfg);
    const auto m = metrics(ranks, e.hits_ns);
    auto j = to_json(m);
    j["arrow"] = e.train_source + "->" + e.test_source;
    j["test_edges"] = test.size();
    j["random_mrr"] = random_matcher_mrr(std::min(e.n_negatives, candidates.size() - 1) + 1);
    report["link_prediction"] = j;
    std::ofstream csv(ctx.out_dir / "metrics.csv");
    write_metrics_csv(csv, m);
    *ctx.log << j["arrow"].get<std::string>() << ": MRR " << m.mrr << ", MR " << m.mr << '\n';
  }
  if (e.labels_path) {
    report["node_classification"] = classify_nodes(ctx, store, hin);
    *ctx.log << "node classification accuracy " << report["node_classification"]["accuracy"] << '\n';
  }
  if (report.empty()) throw ConfigError("nothing to evaluate: set [evaluate] arrow and/or labels");
  write_json(ctx.out_dir / "metrics.json", report);
  return 0;
}

// report ----------------------------------------------------------------------

inline int run_report(const CommandContext& ctx) {
  const Hin hin = load_or_build_hin(ctx.config);
  const auto store = load_store_for(ctx, hin);
  fs::create_directories(ctx.out_dir);
  write_provenance(ctx);
  const auto& a = ctx.config.train.alignment;
  std::ofstream stats_out(ctx.out_dir / "stats.csv");
  write_stats_csv(stats_out, stats(hin));
  nlohmann::json j;
  j["model"] = to_string(store.model.kind);
  j["dim"] = store.dim;
  if (hin.num_sources() >= 2) {
    const auto rows = divergence_report(store, hin, a.hist_bins, a.hist_smoothing);
    std::ofstream div_out(ctx.out_dir / "divergence.csv");
    write_divergence_csv(div_out, rows);
    for (const auto& r : rows) {
      j["divergence"].push_back({{"source_a", r.source_a}, {"source_b", r.source_b}, {"js", r.js}});
      *ctx.log << r.source_a << " vs " << r.source_b << ": js " << r.js << '\n';
    }
  } else {
    *ctx.log << "warning: single source, no divergence to report\n";
  }
  write_json(ctx.out_dir / "report.json", j);
  return 0;
}

// export ----------------------------------------------------------------------

inline int run_export(const CommandContext& ctx) {
  const Hin hin = load_or_build_hin(ctx.config);
  const auto store = load_store_for(ctx, hin);
  fs::create_directories(ctx.out_dir);
  write_provenance(ctx);
  std::vector<std::string> membership(hin.vocab.num_entities());
  for (std::size_t s = 0; s < hin.num_sources(); ++s)
    for (auto id : hin.per_source_entities[s])
      membership[id] += (membership[id].empty() ? "" : ";") + hin.source_names[s];
  std::ofstream ent(ctx.out_dir / "entities.csv");
  export_csv(
      ent, store.table(Table::Entity).values, [&](std::uint64_t i) { return hin.vocab.entities.name(i); },
      [&](std::uint64_t i) { return membership[i]; });
  std::ofstream rel(ctx.out_dir / "relations.csv");
  export_csv(rel, store.table(Table::Relation).values,
             [&](std::uint64_t i) { return hin.vocab.relations.name(static_cast<std::uint32_t>(i)); });
  return 0;
}

}  // namespace sumshine
