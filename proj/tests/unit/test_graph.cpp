// Copyright (c) 2026, The Sumshine Authors
// SPDX-License-Identifier: Apache-2.0

#include <catch_amalgamated.hpp>

#include <sstream>

#include "sumshine/graph.hpp"
#include "sumshine/synthetic.hpp"

using namespace sumshine;

namespace {

std::vector<RawTriple> parse(const std::string& text) {
  std::istringstream in(text);
  return parse_triple_file(in, "inline");
}

}  // namespace

TEST_CASE("triple files parse tab-separated lines", "[graph]") {
  const auto t = parse("a\tr\tb\n\nb\ts\tc\r\n");
  REQUIRE(t.size() == 2);
  CHECK(t[1].head == "b");
  CHECK(t[1].relation == "s");
  CHECK(t[1].tail == "c");
}

TEST_CASE("malformed triple lines report the line number", "[graph]") {
  try {
    parse("a\tr\tb\na\tr\n");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
  CHECK_THROWS_AS(parse("a\t\tb\n"), ParseError);
  CHECK_THROWS_AS(parse("a r b\n"), ParseError);
}

TEST_CASE("ids follow sorted source order and first appearance", "[graph]") {
  SourceManifest m;
  m["b"] = {{"x", "r1", "y"}};
  m["a"] = {{"y", "r0", "z"}, {"y", "r0", "z"}};
  const Hin hin = build_hin(m);
  REQUIRE(hin.source_names == std::vector<std::string>{"a", "b"});
  CHECK(hin.vocab.entities.names() == std::vector<std::string>{"y", "z", "x"});
  CHECK(hin.vocab.relations.names() == std::vector<std::string>{"r0", "r1"});
  CHECK(hin.sources[0].size() == 1);  // in-source duplicate dropped
  CHECK(hin.per_source_entities[0] == std::vector<EntityId>{0, 1});
  CHECK(hin.per_source_entities[1] == std::vector<EntityId>{0, 2});
  CHECK(hin.source_index("b") == 1u);
  CHECK_FALSE(hin.source_index("c").has_value());
}

TEST_CASE("the same edge in two sources is kept in both", "[graph]") {
  SourceManifest m;
  m["a"] = {{"x", "r", "y"}};
  m["b"] = {{"x", "r", "y"}};
  const Hin hin = build_hin(m);
  CHECK(hin.num_edges() == 2);
  CHECK(stats(hin)[0].edges == 2);
}

TEST_CASE("duplicate source names are rejected", "[graph]") {
  CHECK_THROWS_AS(make_manifest({{"a", {}}, {"a", {}}}), ConfigError);
  CHECK_THROWS_AS(build_hin({}), ConfigError);
}

TEST_CASE("types default to a single type and follow the type file otherwise", "[graph]") {
  SourceManifest m;
  m["s"] = {{"u1", "likes", "song"}, {"u2", "likes", "song"}};
  const Hin plain = build_hin(m);
  CHECK(plain.vocab.entity_types.names() == std::vector<std::string>{"default"});

  TypeAssignments types;
  types.entity_types = {{"u1", "user"}, {"song", "track"}, {"ghost", "user"}};
  const Hin typed = build_hin(m, types);
  const auto id = [&](const char* n) { return *typed.vocab.entities.find(n); };
  CHECK(typed.vocab.entity_types.name(typed.vocab.entity_type_of[id("song")]) == "track");
  CHECK(typed.vocab.entity_types.name(typed.vocab.entity_type_of[id("u2")]) == "user");
  CHECK(stats(typed)[0].entity_types == 2);
}

TEST_CASE("relation groups must partition the relations", "[graph]") {
  const std::vector<RawTriple> triples = {{"a", "p", "b"}, {"b", "q", "c"}, {"c", "s", "a"}};
  RelationGroups groups{{"G1", {"p", "q"}}, {"G2", {"s"}}};
  const auto m = split_by_relation(triples, groups);
  CHECK(m.at("G1").size() == 2);
  CHECK(m.at("G2").size() == 1);

  RelationGroups missing{{"G1", {"p"}}, {"G2", {"s"}}};
  try {
    split_by_relation(triples, missing);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("'q'") != std::string::npos);
  }
  RelationGroups doubled{{"G1", {"p", "q", "s"}}, {"G2", {"s"}}};
  CHECK_THROWS_AS(split_by_relation(triples, doubled), ConfigError);
}

TEST_CASE("statistics match the generator's ground truth", "[graph]") {
  SyntheticSpec spec;
  const auto g = make_synthetic_graph(spec);
  const Hin hin = build_hin(g.manifest);
  const auto rows = stats(hin);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].name == "Total");
  CHECK(rows[0].entities == spec.core_entities + spec.dense_only_entities + spec.sparse_only_entities);
  CHECK(rows[0].relations == 2 * spec.relations_per_source);
  CHECK(rows[0].edges == spec.dense_edges + spec.sparse_edges);
  for (const auto& row : rows) {
    if (row.name == "dense") {
      CHECK(row.entities == g.dense.entities);
      CHECK(row.edges == g.dense.edges);
      CHECK(row.relations == g.dense.relations);
    } else if (row.name == "sparse") {
      CHECK(row.entities == g.sparse.entities);
      CHECK(row.edges == g.sparse.edges);
    }
  }
  std::ostringstream csv;
  write_stats_csv(csv, rows);
  CHECK(csv.str().rfind("dataset,num_entities,num_relations,num_edges", 0) == 0);
}

TEST_CASE("binary HIN round trip is exact", "[graph]") {
  const auto g = make_synthetic_graph({});
  TypeAssignments types;
  types.entity_types = {{"e1", "odd"}, {"e2", "even"}};
  const Hin hin = build_hin(g.manifest, types);
  std::stringstream buf;
  save_hin(buf, hin);
  CHECK(load_hin(buf) == hin);

  std::stringstream bad("NOPE");
  CHECK_THROWS_AS(load_hin(bad), FormatError);
  std::string truncated;
  {
    std::stringstream full;
    save_hin(full, hin);
    truncated = full.str().substr(0, full.str().size() / 2);
  }
  std::stringstream cut(truncated);
  CHECK_THROWS_AS(load_hin(cut), FormatError);
}
