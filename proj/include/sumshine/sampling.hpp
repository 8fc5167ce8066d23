// Copyright (c) 2026, The Sumshine Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "sumshine/error.hpp"
#include "sumshine/graph.hpp"
#include "sumshine/rng.hpp"

namespace sumshine {

struct SamplerConfig {
  std::size_t batch_size = 1024;
  std::size_t negatives_per_positive = 4;
  double head_tail_prob = 0.5;  // probability of corrupting the head
  bool filter_true = false;

  void validate() const {
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (negatives_per_positive < 1) throw ConfigError("negatives_per_positive must be >= 1");
    if (!(head_tail_prob >= 0.0 && head_tail_prob <= 1.0)) throw ConfigError("head_tail_prob must be in [0, 1]");
  }
};

/// B positives drawn from one source, each followed by k corruptions that stay
/// inside the source's entity set. negatives[i * k + j] corrupts positives[i].
struct Batch {
  SourceId source;
  std::vector<Triple> positives;
  std::vector<Triple> negatives;
  std::size_t negatives_per_positive = 0;
  std::uint64_t stream = 0;

  std::span<const Triple> negatives_of(std::size_t i) const {
    return std::span<const Triple>(negatives).subspan(i * negatives_per_positive, negatives_per_positive);
  }
};

inline constexpr int kMaxFilterAttempts = 100;

/// Draws k negatives for `positive`. Each one flips a head/tail coin, then
/// replaces that side with an entity drawn uniformly from `entities` minus the
/// entity being replaced. With `known` set, negatives that are true triples are
/// redrawn up to kMaxFilterAttempts times and then accepted as they are.
inline std::vector<Triple> corrupt(const Triple& positive, std::span<const EntityId> entities, std::size_t k,
                                   const SamplerConfig& cfg, Rng& rng,
                                   const std::unordered_set<Triple, TripleHash>* known = nullptr) {
  if (entities.size() < 2) throw SamplerError("corrupt: need at least two candidate entities");
  std::bernoulli_distribution head_coin(cfg.head_tail_prob);
  std::uniform_int_distribution<std::size_t> pick(0, entities.size() - 2);

  auto draw_excluding = [&](EntityId excluded) {
    std::size_t j = pick(rng);
    const auto pos = std::lower_bound(entities.begin(), entities.end(), excluded);
    // Skip over the excluded entity's slot when it is part of the candidate set.
    if (pos != entities.end() && *pos == excluded && j >= static_cast<std::size_t>(pos - entities.begin())) ++j;
    return entities[j];
  };
  auto draw_one = [&] {
    Triple neg = positive;
    if (head_coin(rng))
      neg.head = draw_excluding(positive.head);
    else
      neg.tail = draw_excluding(positive.tail);
    return neg;
  };

  std::vector<Triple> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    Triple neg = draw_one();
    if (known) {
      for (int attempt = 1; attempt < kMaxFilterAttempts && known->contains(neg); ++attempt) neg = draw_one();
    }
    out.push_back(neg);
  }
  return out;
}

/// Source-balanced sampler: every round yields exactly B positives per source,
/// sampled with replacement, so small sources are oversampled. Round r of source
/// i always uses the stream derived from (seed, r, i), which makes any round
/// reproducible on its own (checkpoint resume relies on this).
class Sampler {
 public:
  Sampler(const Hin& hin, SamplerConfig cfg) : hin_(&hin), cfg_(cfg) {
    cfg_.validate();
    for (std::size_t i = 0; i < hin.num_sources(); ++i) {
      if (hin.sources[i].empty())
        throw SamplerError("source '" + hin.source_names[i] + "' has no edges");
      if (hin.per_source_entities[i].size() < 2)
        throw SamplerError("source '" + hin.source_names[i] + "' has fewer than two entities; cannot corrupt");
    }
    if (cfg_.filter_true) {
      known_.resize(hin.num_sources());
      for (std::size_t i = 0; i < hin.num_sources(); ++i)
        known_[i].insert(hin.sources[i].begin(), hin.sources[i].end());
    }
  }

  const SamplerConfig& config() const noexcept { return cfg_; }

  Batch sample_source(std::uint32_t source, std::uint64_t seed, std::uint64_t round) const {
    const auto& triples = hin_->sources[source];
    Batch b;
    b.source = {source, hin_->source_names[source]};
    b.stream = derive_seed(seed, {round, source});
    b.negatives_per_positive = cfg_.negatives_per_positive;
    Rng rng(b.stream);
    std::uniform_int_distribution<std::size_t> pick(0, triples.size() - 1);
    b.positives.reserve(cfg_.batch_size);
    b.negatives.reserve(cfg_.batch_size * cfg_.negatives_per_positive);
    const auto* known = cfg_.filter_true ? &known_[source] : nullptr;
    for (std::size_t i = 0; i < cfg_.batch_size; ++i) {
      const Triple& pos = triples[pick(rng)];
      b.positives.push_back(pos);
      auto negs = corrupt(pos, hin_->per_source_entities[source], cfg_.negatives_per_positive, cfg_, rng, known);
      b.negatives.insert(b.negatives.end(), negs.begin(), negs.end());
    }
    return b;
  }

  /// One batch per source, in source-index order.
  std::vector<Batch> sample_round(std::uint64_t seed, std::uint64_t round) const {
    std::vector<Batch> out;
    out.reserve(hin_->num_sources());
    for (std::uint32_t i = 0; i < hin_->num_sources(); ++i) out.push_back(sample_source(i, seed, round));
    return out;
  }

  /// Rounds per epoch: ceil(max_i |E_i| / B).
  std::size_t rounds_per_epoch() const {
    std::size_t largest = 0;
    for (const auto& s : hin_->sources) largest = std::max(largest, s.size());
    return (largest + cfg_.batch_size - 1) / cfg_.batch_size;
  }

 private:
  const Hin* hin_;
  SamplerConfig cfg_;
  std::vector<std::unordered_set<Triple, TripleHash>> known_;
};

inline std::vector<Batch> sample_round(const Hin& hin, const SamplerConfig& cfg, std::uint64_t seed,
                                       std::uint64_t round) {
  return Sampler(hin, cfg).sample_round(seed, round);
}

}  // namespace sumshine
