// Copyright (c) 2026, The Sumshine Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <set>
#include <stdexcept>
#include <tuple>
#include <string>
#include <unordered_set>
#include <vector>

#include "sumshine/graph.hpp"
#include "sumshine/rng.hpp"

namespace sumshine {

/// Two-source graph with a shared entity core: a "dense" source with many
/// edges per entity and a "sparse" one with few. Entities carry a latent
/// cluster; relation r sends cluster c to cluster c + shift(r) (mod clusters),
/// so both sources follow the same translational rule through different
/// relation names.
struct SyntheticSpec {
  std::size_t core_entities = 200;
  std::size_t dense_only_entities = 1000;
  std::size_t sparse_only_entities = 400;
  std::size_t dense_edges = 7200;
  std::size_t sparse_edges = 800;
  std::size_t relations_per_source = 4;
  std::size_t clusters = 10;
  bool shared_relations = false;
  std::uint64_t seed = 1;
};

struct SourceTruth {
  std::size_t entities = 0;
  std::size_t relations = 0;
  std::size_t edges = 0;
};

struct SyntheticGraph {
  SourceManifest manifest;
  SourceTruth dense;
  SourceTruth sparse;
  std::vector<std::size_t> cluster_of;  // by generator entity index
};

inline std::string synthetic_entity_name(std::size_t i) { return "e" + std::to_string(i); }

inline SyntheticGraph make_synthetic_graph(const SyntheticSpec& spec) {
  SyntheticGraph g;
  Rng rng(derive_seed(spec.seed, {0x5e7}));
  const std::size_t total = spec.core_entities + spec.dense_only_entities + spec.sparse_only_entities;
  g.cluster_of.resize(total);
  std::uniform_int_distribution<std::size_t> cluster(0, spec.clusters - 1);
  for (auto& c : g.cluster_of) c = cluster(rng);

  std::vector<std::size_t> shift(spec.relations_per_source);
  for (std::size_t r = 0; r < shift.size(); ++r) shift[r] = 1 + r % (spec.clusters - 1);

  auto build = [&](const std::string& name, std::vector<std::size_t> members, std::size_t edges,
                   const std::string& rel_prefix, SourceTruth& truth) {
    if (edges < members.size()) throw std::logic_error("synthetic graph: fewer edges than entities");
    std::vector<std::vector<std::size_t>> by_cluster(spec.clusters);
    for (auto e : members) by_cluster[g.cluster_of[e]].push_back(e);
    std::uniform_int_distribution<std::size_t> pick_member(0, members.size() - 1);
    std::uniform_int_distribution<std::size_t> pick_rel(0, spec.relations_per_source - 1);
    std::set<std::tuple<std::size_t, std::size_t, std::size_t>> seen;
    std::vector<RawTriple> triples;
    std::size_t cursor = 0;
    std::shuffle(members.begin(), members.end(), rng);
    while (triples.size() < edges) {
      // First pass covers every member as a head so all of them occur in the source.
      const std::size_t h = cursor < members.size() ? members[cursor++] : members[pick_member(rng)];
      const std::size_t r = pick_rel(rng);
      const auto& targets = by_cluster[(g.cluster_of[h] + shift[r]) % spec.clusters];
      if (targets.empty()) throw std::logic_error("synthetic graph: empty target cluster");
      std::uniform_int_distribution<std::size_t> pick_t(0, targets.size() - 1);
      const std::size_t t = targets[pick_t(rng)];
      if (!seen.insert({h, r, t}).second) continue;
      triples.push_back({synthetic_entity_name(h), rel_prefix + std::to_string(r), synthetic_entity_name(t)});
    }
    truth.entities = members.size();
    truth.relations = spec.relations_per_source;
    truth.edges = triples.size();
    g.manifest[name] = std::move(triples);
  };

  std::vector<std::size_t> dense_members, sparse_members;
  for (std::size_t i = 0; i < spec.core_entities; ++i) {
    dense_members.push_back(i);
    sparse_members.push_back(i);
  }
  for (std::size_t i = 0; i < spec.dense_only_entities; ++i) dense_members.push_back(spec.core_entities + i);
  for (std::size_t i = 0; i < spec.sparse_only_entities; ++i)
    sparse_members.push_back(spec.core_entities + spec.dense_only_entities + i);

  build("dense", dense_members, spec.dense_edges, spec.shared_relations ? "r" : "dr", g.dense);
  build("sparse", sparse_members, spec.sparse_edges, spec.shared_relations ? "r" : "sr", g.sparse);
  return g;
}

}  // namespace sumshine
