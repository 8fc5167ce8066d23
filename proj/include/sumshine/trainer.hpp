// Copyright (c) 2026, The Sumshine Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <future>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "sumshine/alignment.hpp"
#include "sumshine/embedding_store.hpp"
#include "sumshine/graph.hpp"
#include "sumshine/neuralnet.hpp"
#include "sumshine/sampling.hpp"
#include "sumshine/scoring.hpp"

namespace sumshine {

struct TrainConfig {
  ScoringModel model{};
  std::size_t dim = 100;
  SamplerConfig sampler{};
  AlignmentSpec alignment{};
  OptimizerConfig optimizer{};
  OptimizerConfig discriminator_optimizer{};
  std::size_t epochs = 2000;
  std::size_t checkpoint_every = 0;  // 0: only the final checkpoint
  std::uint64_t seed = 0;
  std::size_t discriminator_steps_per_batch = 1;
  std::size_t threads = 1;

  void validate() const {
    model.validate();
    sampler.validate();
    alignment.validate();
    optimizer.validate();
    discriminator_optimizer.validate();
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (dim < 1) throw ConfigError("dim must be >= 1");
    if (threads < 1) throw ConfigError("threads must be >= 1");
  }
};

struct TrainLogRecord {
  std::size_t epoch = 0;
  double sim_loss = 0.0;
  double align_loss = 0.0;
  double disc_loss = 0.0;
  double wall_time = 0.0;
};

inline nlohmann::json to_json(const TrainConfig& c) {
  nlohmann::json j;
  j["model"] = {{"kind", std::string(to_string(c.model.kind))}, {"norm", c.model.norm}, {"margin", c.model.margin}};
  j["dim"] = c.dim;
  j["sampler"] = {{"batch_size", c.sampler.batch_size},
                  {"negatives_per_positive", c.sampler.negatives_per_positive},
                  {"head_tail_prob", c.sampler.head_tail_prob},
                  {"filter_true", c.sampler.filter_true}};
  const auto& a = c.alignment;
  j["alignment"] = {{"kind", std::string(to_string(a.kind))},
                    {"lambda", a.lambda},
                    {"bandwidth", a.mmd_bandwidth.median_heuristic ? nlohmann::json("median")
                                                                   : nlohmann::json(a.mmd_bandwidth.sigma)},
                    {"hist_bins", a.hist_bins},
                    {"hist_smoothing", a.hist_smoothing},
                    {"adversarial_target", a.adversarial_target == AdversarialTarget::Uniform ? "uniform" : "flip"},
                    {"discriminator_hidden", a.discriminator_hidden}};
  auto opt = [](const OptimizerConfig& o) {
    return nlohmann::json{{"learning_rate", o.learning_rate}, {"weight_decay", o.weight_decay}, {"epsilon", o.epsilon}};
  };
  j["optimizer"] = opt(c.optimizer);
  j["discriminator_optimizer"] = opt(c.discriminator_optimizer);
  j["epochs"] = c.epochs;
  j["checkpoint_every"] = c.checkpoint_every;
  j["seed"] = c.seed;
  j["discriminator_steps_per_batch"] = c.discriminator_steps_per_batch;
  return j;
}

inline void write_log_csv(std::ostream& out, const std::vector<TrainLogRecord>& log) {
  out << "epoch,sim_loss,align_loss,disc_loss,wall_time\n";
  out << std::setprecision(10);
  for (const auto& r : log)
    out << r.epoch << ',' << r.sim_loss << ',' << r.align_loss << ',' << r.disc_loss << ',' << r.wall_time << '\n';
}

/// Per-source embedding rows gathered from one batch: the distinct entities
/// (positives and corruptions) and the distinct relations it touches.
template <typename Real>
struct GatheredSample {
  std::vector<EntityId> entity_ids;
  std::vector<RelationId> relation_ids;
  RowMatrix<Real> entities;
  RowMatrix<Real> relations;
};

template <typename Real>
GatheredSample<Real> gather_sample(const BasicEmbeddingStore<Real>& store, const Batch& batch) {
  GatheredSample<Real> s;
  for (const auto* list : {&batch.positives, &batch.negatives})
    for (const auto& t : *list) {
      s.entity_ids.push_back(t.head);
      s.entity_ids.push_back(t.tail);
      s.relation_ids.push_back(t.relation);
    }
  std::sort(s.entity_ids.begin(), s.entity_ids.end());
  s.entity_ids.erase(std::unique(s.entity_ids.begin(), s.entity_ids.end()), s.entity_ids.end());
  std::sort(s.relation_ids.begin(), s.relation_ids.end());
  s.relation_ids.erase(std::unique(s.relation_ids.begin(), s.relation_ids.end()), s.relation_ids.end());
  const auto& ent = store.table(Table::Entity).values;
  const auto& rel = store.table(Table::Relation).values;
  s.entities.resize(static_cast<Eigen::Index>(s.entity_ids.size()), ent.cols());
  for (std::size_t i = 0; i < s.entity_ids.size(); ++i)
    s.entities.row(static_cast<Eigen::Index>(i)) = ent.row(static_cast<Eigen::Index>(s.entity_ids[i]));
  s.relations.resize(static_cast<Eigen::Index>(s.relation_ids.size()), rel.cols());
  for (std::size_t i = 0; i < s.relation_ids.size(); ++i)
    s.relations.row(static_cast<Eigen::Index>(i)) = rel.row(static_cast<Eigen::Index>(s.relation_ids[i]));
  return s;
}

/// Mean over positives of the per-positive margin loss, with scale * dL/dtheta
/// accumulated into `grad`.
template <typename Real>
double similarity_loss(const BasicEmbeddingStore<Real>& store, const Batch& batch, Real scale,
                       SparseGradient<Real>& grad) {
  const auto n = batch.positives.size();
  if (n == 0) return 0.0;
  const Real per = scale / static_cast<Real>(n);
  double total = 0.0;
  std::vector<double> neg_energy(batch.negatives_per_positive);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& pos = batch.positives[i];
    const auto negs = batch.negatives_of(i);
    const double e_pos = static_cast<double>(energy(store, pos));
    for (std::size_t j = 0; j < negs.size(); ++j) neg_energy[j] = static_cast<double>(energy(store, negs[j]));
    const auto ml = margin_loss(store.model, e_pos, neg_energy);
    total += ml.loss;
    if (ml.d_pos != 0.0) accumulate_energy_grad(store, pos, per * static_cast<Real>(ml.d_pos), grad);
    for (std::size_t j = 0; j < negs.size(); ++j)
      if (ml.d_negs[j] != 0.0) accumulate_energy_grad(store, negs[j], per * static_cast<Real>(ml.d_negs[j]), grad);
  }
  return total / static_cast<double>(n);
}

/// Training driver: L_tot = L_align + lambda * L_sim per round, one Adagrad
/// step per source in source-index order. Rounds are seeded from
/// (seed, global round, source), so a run resumed from a checkpoint replays the
/// same batches as an uninterrupted one.
template <typename Real = float>
class BasicTrainer {
 public:
  BasicTrainer(const Hin& hin, TrainConfig cfg)
      : hin_(&hin), cfg_(std::move(cfg)), sampler_((cfg_.validate(), hin), cfg_.sampler) {
    store_ = init_store<Real>(cfg_.model, hin.vocab.num_entities(), hin.vocab.num_relations(), cfg_.dim, cfg_.seed);
    setup_alignment();
  }

  BasicTrainer(const Hin& hin, TrainConfig cfg, BasicEmbeddingStore<Real> store)
      : hin_(&hin), cfg_(std::move(cfg)), sampler_((cfg_.validate(), hin), cfg_.sampler), store_(std::move(store)) {
    if (store_.model != cfg_.model || store_.dim != cfg_.dim ||
        store_.num_entities != hin.vocab.num_entities() || store_.num_relations != hin.vocab.num_relations())
      throw ConfigError("embedding store does not match the training configuration");
    setup_alignment();
  }

  const TrainConfig& config() const noexcept { return cfg_; }
  const BasicEmbeddingStore<Real>& store() const noexcept { return store_; }
  BasicEmbeddingStore<Real>& store() noexcept { return store_; }
  const std::optional<BasicMlp<Real>>& discriminator() const noexcept { return discriminator_; }
  std::optional<BasicMlp<Real>>& discriminator() noexcept { return discriminator_; }
  std::size_t epochs_done() const noexcept { return epochs_done_; }
  void set_epochs_done(std::size_t e) noexcept { epochs_done_ = e; }
  std::size_t rounds_per_epoch() const { return sampler_.rounds_per_epoch(); }
  const std::vector<std::string>& warnings() const noexcept { return warnings_; }
  bool alignment_active() const noexcept { return alignment_active_; }

  struct RoundLosses {
    double sim = 0.0;
    double align = 0.0;
    double disc = 0.0;
  };

  RoundLosses train_round(std::uint64_t round) {
    const auto batches = sampler_.sample_round(cfg_.seed, round);
    const auto k = batches.size();
    const Real lambda = alignment_active_ ? static_cast<Real>(cfg_.alignment.lambda) : Real(1);

    std::vector<SparseGradient<Real>> grads(k);
    std::vector<double> sim(k, 0.0);
    auto sim_job = [&](std::size_t i) {
      grads[i] = store_.make_gradient();
      sim[i] = similarity_loss(store_, batches[i], lambda, grads[i]);
    };
    if (cfg_.threads > 1 && k > 1) {
      std::vector<std::future<void>> jobs;
      for (std::size_t i = 0; i < k; ++i) jobs.push_back(std::async(std::launch::async, sim_job, i));
      for (auto& j : jobs) j.get();
    } else {
      for (std::size_t i = 0; i < k; ++i) sim_job(i);
    }

    RoundLosses losses;
    for (double s : sim) losses.sim += s;

    if (alignment_active_) {
      std::vector<GatheredSample<Real>> samples;
      samples.reserve(k);
      for (const auto& b : batches) samples.push_back(gather_sample(store_, b));
      if (cfg_.alignment.kind == AlignmentKind::Adversarial)
        adversarial_terms(samples, grads, losses);
      else
        distance_terms(samples, grads, losses);
    }

    for (std::size_t i = 0; i < k; ++i) {
      if (!std::isfinite(sim[i]) || !grads[i].all_finite()) throw NumericError(dump(batches[i], round));
    }
    if (!std::isfinite(losses.align) || !std::isfinite(losses.disc))
      throw NumericError("non-finite alignment loss in round " + std::to_string(round));
    for (std::size_t i = 0; i < k; ++i) adagrad_step(store_, grads[i], cfg_.optimizer);
    return losses;
  }

  TrainLogRecord train_epoch() {
    const auto start = std::chrono::steady_clock::now();
    const auto rounds = rounds_per_epoch();
    TrainLogRecord rec;
    rec.epoch = epochs_done_ + 1;
    for (std::size_t r = 0; r < rounds; ++r) {
      const auto l = train_round(epochs_done_ * rounds + r);
      rec.sim_loss += l.sim;
      rec.align_loss += l.align;
      rec.disc_loss += l.disc;
    }
    rec.sim_loss /= static_cast<double>(rounds);
    rec.align_loss /= static_cast<double>(rounds);
    rec.disc_loss /= static_cast<double>(rounds);
    rec.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    ++epochs_done_;
    return rec;
  }

 private:
  void setup_alignment() {
    const auto kind = cfg_.alignment.kind;
    alignment_active_ = kind != AlignmentKind::None;
    if (alignment_active_ && hin_->num_sources() < 2) {
      warnings_.push_back("alignment disabled: fewer than two sources");
      alignment_active_ = false;
    }
    if (alignment_active_ && kind == AlignmentKind::Adversarial) {
      if (cfg_.alignment.adversarial_target == AdversarialTarget::Flip && hin_->num_sources() != 2)
        throw ConfigError("flip adversarial target is only defined for two sources");
      if (!discriminator_) {
        MlpSpec spec;
        spec.layer_dims.push_back(cfg_.dim);
        for (auto h : cfg_.alignment.discriminator_hidden) spec.layer_dims.push_back(h);
        spec.layer_dims.push_back(hin_->num_sources());
        spec.seed = derive_seed(cfg_.seed, {0xd15c});
        discriminator_.emplace(spec);
      }
    }
  }

  static void scatter(SparseGradient<Real>& g, Table table, const auto& ids, const RowMatrix<Real>& rows) {
    for (std::size_t r = 0; r < ids.size(); ++r)
      g.add(table, ids[r], rows.row(static_cast<Eigen::Index>(r)).transpose());
  }

  void distance_terms(const std::vector<GatheredSample<Real>>& samples, std::vector<SparseGradient<Real>>& grads,
                      RoundLosses& losses) const {
    std::vector<RowMatrix<Real>> ent, rel;
    for (const auto& s : samples) {
      ent.push_back(s.entities);
      rel.push_back(s.relations);
    }
    const auto dl = dist_loss(ent, rel, cfg_.alignment);
    losses.align = dl.value;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      scatter(grads[i], Table::Entity, samples[i].entity_ids, dl.entity_grads[i]);
      scatter(grads[i], Table::Relation, samples[i].relation_ids, dl.relation_grads[i]);
    }
  }

  /// Discriminator first learns true source labels; then every source's rows
  /// are pushed toward the confusion target through the frozen discriminator.
  void adversarial_terms(const std::vector<GatheredSample<Real>>& samples, std::vector<SparseGradient<Real>>& grads,
                         RoundLosses& losses) {
    auto& disc = *discriminator_;
    const auto k = samples.size();
    std::vector<Matrix<Real>> inputs(k);
    Eigen::Index total = 0;
    for (std::size_t i = 0; i < k; ++i) {
      inputs[i].resize(samples[i].entities.rows() + samples[i].relations.rows(), static_cast<Eigen::Index>(cfg_.dim));
      inputs[i] << samples[i].entities, samples[i].relations;
      total += inputs[i].rows();
    }
    Matrix<Real> all(total, static_cast<Eigen::Index>(cfg_.dim));
    Matrix<Real> labels = Matrix<Real>::Zero(total, static_cast<Eigen::Index>(k));
    Eigen::Index at = 0;
    for (std::size_t i = 0; i < k; ++i) {
      all.middleRows(at, inputs[i].rows()) = inputs[i];
      labels.middleRows(at, inputs[i].rows()).col(static_cast<Eigen::Index>(i)).setOnes();
      at += inputs[i].rows();
    }
    for (std::size_t s = 0; s < cfg_.discriminator_steps_per_batch; ++s)
      losses.disc += cross_entropy_step(disc, all, labels, cfg_.discriminator_optimizer);
    if (cfg_.discriminator_steps_per_batch > 0)
      losses.disc /= static_cast<double>(cfg_.discriminator_steps_per_batch);

    for (std::size_t i = 0; i < k; ++i) {
      if (inputs[i].rows() == 0) continue;
      Matrix<Real> target = Matrix<Real>::Zero(inputs[i].rows(), static_cast<Eigen::Index>(k));
      if (cfg_.alignment.adversarial_target == AdversarialTarget::Uniform)
        target.setConstant(Real(1) / static_cast<Real>(k));
      else
        target.col(static_cast<Eigen::Index>((i + 1) % k)).setOnes();
      const auto g = detail::backprop(disc, inputs[i], target, false, true);
      losses.align += g.loss;
      const auto ne = samples[i].entities.rows();
      const RowMatrix<Real> ent_grad = g.input.topRows(ne);
      const RowMatrix<Real> rel_grad = g.input.bottomRows(g.input.rows() - ne);
      scatter(grads[i], Table::Entity, samples[i].entity_ids, ent_grad);
      scatter(grads[i], Table::Relation, samples[i].relation_ids, rel_grad);
    }
  }

  std::string dump(const Batch& b, std::uint64_t round) const {
    std::ostringstream os;
    os << "non-finite loss or gradient in round " << round << ", source '" << b.source.name << "' (stream "
       << b.stream << "); first positives:";
    for (std::size_t i = 0; i < std::min<std::size_t>(b.positives.size(), 5); ++i) {
      const auto& t = b.positives[i];
      os << " (" << t.head << ',' << t.relation << ',' << t.tail << ")=" << energy(store_, t);
    }
    return os.str();
  }

  const Hin* hin_;
  TrainConfig cfg_;
  Sampler sampler_;
  BasicEmbeddingStore<Real> store_;
  std::optional<BasicMlp<Real>> discriminator_;
  std::size_t epochs_done_ = 0;
  bool alignment_active_ = false;
  std::vector<std::string> warnings_;
};

using Trainer = BasicTrainer<float>;

// Checkpoints ---------------------------------------------------------------

inline std::string checkpoint_stem(std::size_t epoch) {
  std::ostringstream os;
  os << "ckpt-" << std::setw(6) << std::setfill('0') << epoch;
  return os.str();
}

/// Writes <stem>.emb, <stem>.json (config + epoch) and, in adversarial mode, <stem>.disc.
template <typename Real>
std::filesystem::path write_checkpoint(const std::filesystem::path& dir, const BasicTrainer<Real>& trainer) {
  std::filesystem::create_directories(dir);
  const auto stem = dir / checkpoint_stem(trainer.epochs_done());
  save_store(stem.string() + ".emb", trainer.store());
  if (trainer.discriminator()) save_mlp(stem.string() + ".disc", *trainer.discriminator());
  nlohmann::json side;
  side["epoch"] = trainer.epochs_done();
  side["config"] = to_json(trainer.config());
  std::ofstream(stem.string() + ".json") << side.dump(2) << '\n';
  return stem;
}

/// Latest checkpoint epoch in `dir`, if any.
inline std::optional<std::size_t> latest_checkpoint(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) return std::nullopt;
  std::optional<std::size_t> best;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const auto name = entry.path().filename().string();
    if (name.rfind("ckpt-", 0) != 0 || entry.path().extension() != ".json") continue;
    const auto epoch = static_cast<std::size_t>(std::stoull(name.substr(5, name.find('.') - 5)));
    if (!std::filesystem::exists(dir / (checkpoint_stem(epoch) + ".emb"))) continue;
    if (!best || epoch > *best) best = epoch;
  }
  return best;
}

/// Restores trainer state from a checkpoint. Everything except the epoch budget
/// and checkpoint cadence must match the running configuration.
template <typename Real>
void restore_checkpoint(const std::filesystem::path& dir, std::size_t epoch, BasicTrainer<Real>& trainer) {
  const auto stem = (dir / checkpoint_stem(epoch)).string();
  nlohmann::json side;
  std::ifstream(stem + ".json") >> side;
  auto saved = side.at("config");
  auto current = to_json(trainer.config());
  for (auto* j : {&saved, &current}) {
    j->erase("epochs");
    j->erase("checkpoint_every");
  }
  if (saved != current) throw ConfigError("checkpoint " + stem + " was written with a different configuration");
  trainer.store() = load_store<Real>(stem + ".emb");
  if (trainer.discriminator()) trainer.discriminator() = load_mlp<Real>(stem + ".disc");
  trainer.set_epochs_done(side.at("epoch").get<std::size_t>());
}

template <typename Real = float>
struct TrainResult {
  BasicEmbeddingStore<Real> store;
  std::optional<BasicMlp<Real>> discriminator;
  std::vector<TrainLogRecord> log;
  std::vector<std::filesystem::path> checkpoints;
  std::vector<std::string> warnings;
  std::size_t resumed_from = 0;
};

struct TrainOptions {
  std::optional<std::filesystem::path> checkpoint_dir;
  bool resume = false;
  /// Stop after this many epochs in this invocation (simulates an interruption).
  std::optional<std::size_t> stop_after;
};

/// Runs epochs up to cfg.epochs, checkpointing every cfg.checkpoint_every
/// epochs and at completion when a checkpoint directory is given.
template <typename Real = float>
TrainResult<Real> train(const Hin& hin, const TrainConfig& cfg, const TrainOptions& opts = {}) {
  BasicTrainer<Real> trainer(hin, cfg);
  TrainResult<Real> result;
  if (opts.resume && opts.checkpoint_dir) {
    if (auto e = latest_checkpoint(*opts.checkpoint_dir)) {
      restore_checkpoint(*opts.checkpoint_dir, *e, trainer);
      result.resumed_from = *e;
    }
  }
  std::size_t ran = 0;
  while (trainer.epochs_done() < cfg.epochs) {
    if (opts.stop_after && ran >= *opts.stop_after) break;
    result.log.push_back(trainer.train_epoch());
    ++ran;
    const bool final_epoch = trainer.epochs_done() == cfg.epochs;
    const bool periodic = cfg.checkpoint_every > 0 && trainer.epochs_done() % cfg.checkpoint_every == 0;
    if (opts.checkpoint_dir && (periodic || final_epoch))
      result.checkpoints.push_back(write_checkpoint(*opts.checkpoint_dir, trainer));
  }
  result.warnings = trainer.warnings();
  result.store = std::move(trainer.store());
  result.discriminator = std::move(trainer.discriminator());
  return result;
}

}  // namespace sumshine
