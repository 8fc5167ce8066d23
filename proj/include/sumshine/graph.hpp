// Copyright (c) 2026, The Sumshine Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "sumshine/binary_io.hpp"
#include "sumshine/error.hpp"

namespace sumshine {

using EntityId = std::uint64_t;
using RelationId = std::uint32_t;

struct Triple {
  EntityId head = 0;
  RelationId relation = 0;
  EntityId tail = 0;

  friend bool operator==(const Triple&, const Triple&) = default;
  friend auto operator<=>(const Triple&, const Triple&) = default;
};

struct TripleHash {
  std::size_t operator()(const Triple& t) const noexcept {
    std::uint64_t h = t.head * 0x9e3779b97f4a7c15ULL;
    h ^= (static_cast<std::uint64_t>(t.relation) + 0x7f4a7c15ULL) * 0xbf58476d1ce4e5b9ULL;
    h ^= (t.tail + (h << 6) + (h >> 2)) * 0x94d049bb133111ebULL;
    return static_cast<std::size_t>(h ^ (h >> 29));
  }
};

/// A triple still carrying its surface names, before ids are assigned.
struct RawTriple {
  std::string head;
  std::string relation;
  std::string tail;

  friend bool operator==(const RawTriple&, const RawTriple&) = default;
};

struct SourceId {
  std::uint32_t index = 0;
  std::string name;
};

/// Insertion-ordered string interner.
class NameTable {
 public:
  std::uint64_t intern(std::string_view name) {
    auto it = ids_.find(std::string(name));
    if (it != ids_.end()) return it->second;
    const auto id = static_cast<std::uint64_t>(names_.size());
    names_.emplace_back(name);
    ids_.emplace(names_.back(), id);
    return id;
  }

  std::optional<std::uint64_t> find(std::string_view name) const {
    auto it = ids_.find(std::string(name));
    if (it == ids_.end()) return std::nullopt;
    return it->second;
  }

  const std::string& name(std::uint64_t id) const { return names_.at(id); }
  const std::vector<std::string>& names() const noexcept { return names_; }
  std::size_t size() const noexcept { return names_.size(); }

  friend bool operator==(const NameTable& a, const NameTable& b) { return a.names_ == b.names_; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::uint64_t> ids_;
};

/// Entity/relation vocabularies plus the type maps (tau for entities, phi for
/// relations). Without a type file every entity and relation has type 0.
struct Vocab {
  NameTable entities;
  NameTable relations;
  NameTable entity_types;
  NameTable relation_types;
  std::vector<std::uint64_t> entity_type_of;
  std::vector<std::uint64_t> relation_type_of;

  std::size_t num_entities() const noexcept { return entities.size(); }
  std::size_t num_relations() const noexcept { return relations.size(); }

  friend bool operator==(const Vocab&, const Vocab&) = default;
};

struct Hin {
  Vocab vocab;
  std::vector<std::string> source_names;
  std::vector<std::vector<Triple>> sources;
  std::vector<std::vector<EntityId>> per_source_entities;

  std::size_t num_sources() const noexcept { return sources.size(); }

  std::size_t num_edges() const noexcept {
    std::size_t n = 0;
    for (const auto& s : sources) n += s.size();
    return n;
  }

  std::optional<std::uint32_t> source_index(std::string_view name) const {
    for (std::size_t i = 0; i < source_names.size(); ++i)
      if (source_names[i] == name) return static_cast<std::uint32_t>(i);
    return std::nullopt;
  }

  friend bool operator==(const Hin&, const Hin&) = default;
};

/// Ordered name -> triples. Iteration order (sorted by name) fixes id assignment.
using SourceManifest = std::map<std::string, std::vector<RawTriple>>;

namespace detail {

inline std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find('\t', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

inline std::string_view strip_cr(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

}  // namespace detail

/// Reads `head<TAB>relation<TAB>tail` lines. Blank lines are skipped, duplicates
/// are kept. `origin` only decorates error messages.
inline std::vector<RawTriple> parse_triple_file(std::istream& in, const std::string& origin = "<stream>") {
  std::vector<RawTriple> triples;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto view = detail::strip_cr(line);
    if (view.empty()) continue;
    const auto fields = detail::split_tabs(view);
    if (fields.size() != 3)
      throw ParseError(origin + ": expected 3 tab-separated fields, got " + std::to_string(fields.size()),
                       line_no);
    if (fields[0].empty() || fields[1].empty() || fields[2].empty())
      throw ParseError(origin + ": empty field", line_no);
    triples.push_back({std::string(fields[0]), std::string(fields[1]), std::string(fields[2])});
  }
  return triples;
}

inline std::vector<RawTriple> parse_triple_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open triple file: " + path);
  return parse_triple_file(in, path);
}

/// `name<TAB>type` lines; used for both entity and relation type files.
inline std::vector<std::pair<std::string, std::string>> parse_type_file(std::istream& in,
                                                                        const std::string& origin) {
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto view = detail::strip_cr(line);
    if (view.empty()) continue;
    const auto fields = detail::split_tabs(view);
    if (fields.size() != 2) throw ParseError(origin + ": expected name<TAB>type", line_no);
    out.emplace_back(std::string(fields[0]), std::string(fields[1]));
  }
  return out;
}

struct TypeAssignments {
  std::vector<std::pair<std::string, std::string>> entity_types;
  std::vector<std::pair<std::string, std::string>> relation_types;
};

namespace detail {

inline void assign_types(const NameTable& names, const std::vector<std::pair<std::string, std::string>>& pairs,
                         NameTable& type_names, std::vector<std::uint64_t>& type_of) {
  type_of.assign(names.size(), 0);
  if (pairs.empty()) {
    type_names.intern("default");
    return;
  }
  // Names absent from the type file fall back to the first-listed type.
  for (const auto& [name, type] : pairs) {
    const auto type_id = type_names.intern(type);
    if (auto id = names.find(name)) type_of[*id] = type_id;
  }
}

}  // namespace detail

/// Builds the merged HIN. Sources are visited in sorted-name order and ids are
/// handed out on first appearance; triples are deduplicated within a source only.
inline Hin build_hin(const SourceManifest& manifest, const TypeAssignments& types = {}) {
  if (manifest.empty()) throw ConfigError("build_hin: at least one source is required");
  Hin hin;
  for (const auto& [name, raw] : manifest) {
    hin.source_names.push_back(name);
    std::vector<Triple> triples;
    triples.reserve(raw.size());
    std::unordered_set<Triple, TripleHash> seen;
    for (const auto& r : raw) {
      const Triple t{hin.vocab.entities.intern(r.head),
                     static_cast<RelationId>(hin.vocab.relations.intern(r.relation)),
                     hin.vocab.entities.intern(r.tail)};
      if (seen.insert(t).second) triples.push_back(t);
    }
    std::vector<EntityId> ents;
    ents.reserve(2 * triples.size());
    for (const auto& t : triples) {
      ents.push_back(t.head);
      ents.push_back(t.tail);
    }
    std::sort(ents.begin(), ents.end());
    ents.erase(std::unique(ents.begin(), ents.end()), ents.end());
    hin.sources.push_back(std::move(triples));
    hin.per_source_entities.push_back(std::move(ents));
  }
  detail::assign_types(hin.vocab.entities, types.entity_types, hin.vocab.entity_types, hin.vocab.entity_type_of);
  detail::assign_types(hin.vocab.relations, types.relation_types, hin.vocab.relation_types,
                       hin.vocab.relation_type_of);
  return hin;
}

/// Duplicate source names are a configuration error; the map-based manifest
/// cannot express them, so callers assembling a manifest from a list go through here.
inline SourceManifest make_manifest(std::vector<std::pair<std::string, std::vector<RawTriple>>> entries) {
  SourceManifest manifest;
  for (auto& [name, triples] : entries) {
    if (!manifest.emplace(name, std::move(triples)).second)
      throw ConfigError("duplicate source name: " + name);
  }
  return manifest;
}

using RelationGroups = std::map<std::string, std::set<std::string>>;

/// Routes each triple to the group owning its relation. The groups must
/// partition the relations that occur in `triples`.
inline SourceManifest split_by_relation(const std::vector<RawTriple>& triples, const RelationGroups& groups) {
  std::unordered_map<std::string, std::vector<std::string>> owner;
  for (const auto& [group, rels] : groups)
    for (const auto& r : rels) owner[r].push_back(group);

  std::set<std::string> doubly;
  for (const auto& [rel, gs] : owner)
    if (gs.size() > 1) doubly.insert(rel);
  std::set<std::string> missing;
  for (const auto& t : triples)
    if (!owner.contains(t.relation)) missing.insert(t.relation);

  if (!doubly.empty() || !missing.empty()) {
    std::string msg = "relation groups do not partition the relations:";
    for (const auto& r : missing) msg += " '" + r + "' (no group)";
    for (const auto& r : doubly) msg += " '" + r + "' (several groups)";
    throw ConfigError(msg);
  }

  SourceManifest manifest;
  for (const auto& [group, rels] : groups) manifest[group];
  for (const auto& t : triples) manifest[owner.at(t.relation).front()].push_back(t);
  return manifest;
}

struct GraphCounts {
  std::string name;
  std::size_t entities = 0;
  std::size_t relations = 0;
  std::size_t edges = 0;
  std::size_t entity_types = 0;

  friend bool operator==(const GraphCounts&, const GraphCounts&) = default;
};

/// Row 0 is the merged graph ("Total"), followed by one row per source.
inline std::vector<GraphCounts> stats(const Hin& hin) {
  std::vector<GraphCounts> rows;
  std::set<EntityId> all_entities;
  std::set<RelationId> all_relations;
  std::vector<GraphCounts> per_source;
  for (std::size_t i = 0; i < hin.num_sources(); ++i) {
    std::set<RelationId> rels;
    std::set<std::uint64_t> types;
    for (const auto& t : hin.sources[i]) rels.insert(t.relation);
    for (auto e : hin.per_source_entities[i]) types.insert(hin.vocab.entity_type_of[e]);
    all_entities.insert(hin.per_source_entities[i].begin(), hin.per_source_entities[i].end());
    all_relations.insert(rels.begin(), rels.end());
    per_source.push_back({hin.source_names[i], hin.per_source_entities[i].size(), rels.size(),
                          hin.sources[i].size(), types.size()});
  }
  std::set<std::uint64_t> all_types;
  for (auto e : all_entities) all_types.insert(hin.vocab.entity_type_of[e]);
  rows.push_back({"Total", all_entities.size(), all_relations.size(), hin.num_edges(), all_types.size()});
  rows.insert(rows.end(), per_source.begin(), per_source.end());
  return rows;
}

inline void write_stats_csv(std::ostream& out, const std::vector<GraphCounts>& rows) {
  out << "dataset,num_entities,num_relations,num_edges,num_entity_types\n";
  for (const auto& r : rows)
    out << r.name << ',' << r.entities << ',' << r.relations << ',' << r.edges << ',' << r.entity_types << '\n';
}

// HIN1 container ------------------------------------------------------------

namespace detail {

inline void write_names(std::ostream& out, const NameTable& t) {
  binary::write<std::uint64_t>(out, t.size());
  for (const auto& n : t.names()) binary::write_string(out, n);
}

inline NameTable read_names(std::istream& in) {
  NameTable t;
  const auto n = binary::read<std::uint64_t>(in);
  for (std::uint64_t i = 0; i < n; ++i) {
    const auto name = binary::read_string(in);
    if (t.intern(name) != i) throw FormatError("duplicate name in HIN1 vocabulary: " + name);
  }
  return t;
}

inline void write_ids(std::ostream& out, const std::vector<std::uint64_t>& ids) {
  binary::write<std::uint64_t>(out, ids.size());
  binary::write_array(out, ids.data(), ids.size());
}

inline std::vector<std::uint64_t> read_ids(std::istream& in, std::uint64_t expected) {
  const auto n = binary::read<std::uint64_t>(in);
  if (n != expected) throw FormatError("HIN1 type map size mismatch");
  std::vector<std::uint64_t> ids(n);
  binary::read_array(in, ids.data(), n);
  return ids;
}

}  // namespace detail

inline constexpr std::uint32_t kHinVersion = 1;

inline void save_hin(std::ostream& out, const Hin& hin) {
  binary::write_magic(out, "HIN1");
  binary::write<std::uint32_t>(out, kHinVersion);
  detail::write_names(out, hin.vocab.entities);
  detail::write_names(out, hin.vocab.relations);
  detail::write_names(out, hin.vocab.entity_types);
  detail::write_names(out, hin.vocab.relation_types);
  detail::write_ids(out, hin.vocab.entity_type_of);
  detail::write_ids(out, hin.vocab.relation_type_of);
  binary::write<std::uint64_t>(out, hin.num_sources());
  for (std::size_t i = 0; i < hin.num_sources(); ++i) {
    binary::write_string(out, hin.source_names[i]);
    binary::write<std::uint64_t>(out, hin.sources[i].size());
    for (const auto& t : hin.sources[i]) {
      binary::write<std::uint64_t>(out, t.head);
      binary::write<std::uint32_t>(out, t.relation);
      binary::write<std::uint64_t>(out, t.tail);
    }
  }
}

inline Hin load_hin(std::istream& in) {
  binary::expect_magic(in, "HIN1");
  if (const auto v = binary::read<std::uint32_t>(in); v != kHinVersion)
    throw FormatError("unsupported HIN1 version " + std::to_string(v));
  Hin hin;
  hin.vocab.entities = detail::read_names(in);
  hin.vocab.relations = detail::read_names(in);
  hin.vocab.entity_types = detail::read_names(in);
  hin.vocab.relation_types = detail::read_names(in);
  hin.vocab.entity_type_of = detail::read_ids(in, hin.vocab.entities.size());
  hin.vocab.relation_type_of = detail::read_ids(in, hin.vocab.relations.size());
  const auto k = binary::read<std::uint64_t>(in);
  for (std::uint64_t s = 0; s < k; ++s) {
    hin.source_names.push_back(binary::read_string(in));
    const auto n = binary::read<std::uint64_t>(in);
    std::vector<Triple> triples;
    std::vector<EntityId> ents;
    for (std::uint64_t i = 0; i < n; ++i) {
      Triple t;
      t.head = binary::read<std::uint64_t>(in);
      t.relation = binary::read<std::uint32_t>(in);
      t.tail = binary::read<std::uint64_t>(in);
      if (t.head >= hin.vocab.num_entities() || t.tail >= hin.vocab.num_entities() ||
          t.relation >= hin.vocab.num_relations())
        throw FormatError("HIN1 triple references an unknown id");
      triples.push_back(t);
      ents.push_back(t.head);
      ents.push_back(t.tail);
    }
    std::sort(ents.begin(), ents.end());
    ents.erase(std::unique(ents.begin(), ents.end()), ents.end());
    hin.sources.push_back(std::move(triples));
    hin.per_source_entities.push_back(std::move(ents));
  }
  return hin;
}

inline void save_hin(const std::string& path, const Hin& hin) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  save_hin(out, hin);
}

inline Hin load_hin(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open HIN file: " + path);
  return load_hin(in);
}

}  // namespace sumshine
