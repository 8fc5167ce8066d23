// Copyright (c) 2026, The Sumshine Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdint>
#include <string>
#include <string_view>

#include "sumshine/error.hpp"

namespace sumshine {

enum class ModelKind : std::uint32_t { TransE = 0, TransR = 1, TransD = 2, Rescal = 3, DistMult = 4, ComplEx = 5 };

inline constexpr std::array<ModelKind, 6> kAllModelKinds = {ModelKind::TransE, ModelKind::TransR,
                                                            ModelKind::TransD, ModelKind::Rescal,
                                                            ModelKind::DistMult, ModelKind::ComplEx};

inline std::string_view to_string(ModelKind k) {
  switch (k) {
    case ModelKind::TransE: return "TransE";
    case ModelKind::TransR: return "TransR";
    case ModelKind::TransD: return "TransD";
    case ModelKind::Rescal: return "RESCAL";
    case ModelKind::DistMult: return "DistMult";
    case ModelKind::ComplEx: return "ComplEx";
  }
  return "?";
}

inline ModelKind parse_model_kind(std::string_view s) {
  std::string lower(s);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  for (auto k : kAllModelKinds) {
    std::string name(to_string(k));
    std::transform(name.begin(), name.end(), name.begin(), [](unsigned char c) { return std::tolower(c); });
    if (name == lower) return k;
  }
  throw ConfigError("unknown scoring model: " + std::string(s));
}

inline constexpr bool is_translational(ModelKind k) {
  return k == ModelKind::TransE || k == ModelKind::TransR || k == ModelKind::TransD;
}

/// Scoring function choice. Energies follow one convention for every kind:
/// lower energy = more plausible edge.
struct ScoringModel {
  ModelKind kind = ModelKind::TransE;
  int norm = 1;  // p in ||.||_p, translational kinds only
  double margin = 1.0;

  void validate() const {
    if (!(margin > 0.0)) throw ConfigError("margin must be positive");
    if (norm != 1 && norm != 2) throw ConfigError("norm order must be 1 or 2");
  }

  friend bool operator==(const ScoringModel&, const ScoringModel&) = default;
};

/// Parameter tables a store may carry. Which ones exist depends on the model.
enum class Table : std::uint32_t {
  Entity = 0,
  Relation = 1,
  EntityProj = 2,      // TransD M_h / M_t, one vector per entity
  RelationProj = 3,    // TransD M_r
  RelationMatrix = 4,  // TransR / RESCAL M_r, flattened row-major d x d
};

inline constexpr std::size_t kNumTables = 5;

inline std::string_view to_string(Table t) {
  switch (t) {
    case Table::Entity: return "entity";
    case Table::Relation: return "relation";
    case Table::EntityProj: return "entity_proj";
    case Table::RelationProj: return "relation_proj";
    case Table::RelationMatrix: return "relation_matrix";
  }
  return "?";
}

inline constexpr bool model_uses(ModelKind k, Table t) {
  switch (t) {
    case Table::Entity:
    case Table::Relation: return true;
    case Table::EntityProj:
    case Table::RelationProj: return k == ModelKind::TransD;
    case Table::RelationMatrix: return k == ModelKind::TransR || k == ModelKind::Rescal;
  }
  return false;
}

}  // namespace sumshine
