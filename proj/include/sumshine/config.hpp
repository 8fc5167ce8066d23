// Copyright (c) 2026, The Sumshine Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "sumshine/error.hpp"
#include "sumshine/evaluation.hpp"
#include "sumshine/graph.hpp"
#include "sumshine/trainer.hpp"

// Run configuration: one INI-style file with sections, e.g.
//
//   [run]        seed = 7
//   [sources]    A = a.tsv            (or [split] inputs = ... plus [groups])
//   [model]      kind = TransE
//   [alignment]  kind = adversarial
//                lambda = [0.01, 0.1, 1, 10, 100, 1000]   ; bracketed list = grid axis
//   [evaluate]   arrow = A->B
namespace sumshine {

namespace pt = boost::property_tree;

struct EvaluationSpec {
  std::string train_source;
  std::string test_source;
  std::vector<std::size_t> hits_ns = {1, 3, 10};
  std::size_t n_negatives = 1000;
  std::size_t max_test_edges = 0;  // 0: every test edge
  bool filtered = false;
  std::uint64_t seed = 0;
  MatcherConfig matcher{};
  std::optional<std::string> labels_path;
  double label_train_fraction = 0.8;
  ClassifierConfig classifier{};
};

struct RunConfig {
  std::filesystem::path base_dir;  // relative paths resolve against the config file's directory
  std::map<std::string, std::string> sources;
  std::vector<std::string> split_inputs;
  RelationGroups groups;
  std::optional<std::string> hin_path;
  std::optional<std::string> entity_types_path;
  std::optional<std::string> relation_types_path;
  TrainConfig train{};
  bool resume = true;
  EvaluationSpec evaluation{};
  std::filesystem::path out_dir = "out";
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  pt::ptree raw;  // resolved key/values, echoed into every output directory

  std::filesystem::path resolve(const std::string& p) const {
    const std::filesystem::path path(p);
    return path.is_absolute() ? path : base_dir / path;
  }
};

namespace detail {

inline std::string trim(std::string s) {
  auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

inline std::vector<std::string> split_list(const std::string& s, char sep = ',') {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

inline bool is_grid_value(const std::string& v) {
  const auto t = trim(v);
  return t.size() >= 2 && t.front() == '[' && t.back() == ']';
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    T out{};
    if constexpr (std::is_floating_point_v<T>)
      out = static_cast<T>(std::stod(value, &used));
    else if constexpr (std::is_unsigned_v<T>) {
      if (!value.empty() && value.front() == '-') throw std::invalid_argument("negative");
      out = static_cast<T>(std::stoull(value, &used));
    } else
      out = static_cast<T>(std::stoll(value, &used));
    if (used != value.size()) throw std::invalid_argument("trailing characters");
    return out;
  } catch (const std::exception&) {
    throw ConfigError("invalid number for '" + key + "': '" + value + "'");
  }
}

inline bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw ConfigError("invalid boolean for '" + key + "': '" + value + "'");
}

inline std::vector<std::size_t> parse_sizes(const std::string& key, const std::string& value) {
  std::vector<std::size_t> out;
  for (const auto& item : split_list(value)) out.push_back(parse_number<std::size_t>(key, item));
  return out;
}

/// Strict "A->B" arrow.
inline std::pair<std::string, std::string> parse_arrow(const std::string& arrow) {
  const auto pos = arrow.find("->");
  if (pos == std::string::npos || arrow.find("->", pos + 2) != std::string::npos)
    throw ConfigError("arrow must look like 'A->B': '" + arrow + "'");
  auto lhs = trim(arrow.substr(0, pos));
  auto rhs = trim(arrow.substr(pos + 2));
  if (lhs.empty() || rhs.empty()) throw ConfigError("arrow must name both sources: '" + arrow + "'");
  return {lhs, rhs};
}

/// Reads each key of a section through a handler; unknown keys are rejected.
class SectionReader {
 public:
  SectionReader(const pt::ptree& root, std::string section) : section_(std::move(section)) {
    if (auto child = root.get_child_optional(section_)) node_ = &*child;
  }

  template <typename F>
  void on(const std::string& key, F&& handler) {
    known_.insert(key);
    if (!node_) return;
    if (auto v = node_->get_optional<std::string>(pt::ptree::path_type(key, '\0')))
      handler(trim(*v), section_ + "." + key);
  }

  void finish() const {
    if (!node_) return;
    for (const auto& [k, v] : *node_)
      if (!known_.contains(k)) throw ConfigError("unknown key '" + k + "' in section [" + section_ + "]");
  }

 private:
  std::string section_;
  const pt::ptree* node_ = nullptr;
  std::set<std::string> known_;
};

inline OptimizerConfig& apply_optimizer(SectionReader& s, OptimizerConfig& o, const std::string& prefix = "") {
  s.on(prefix + "learning_rate", [&](auto v, auto k) { o.learning_rate = parse_number<double>(k, v); });
  s.on(prefix + "weight_decay", [&](auto v, auto k) { o.weight_decay = parse_number<double>(k, v); });
  s.on(prefix + "epsilon", [&](auto v, auto k) { o.epsilon = parse_number<double>(k, v); });
  return o;
}

}  // namespace detail

inline RelationGroups parse_groups(const pt::ptree& groups) {
  RelationGroups out;
  for (const auto& [name, node] : groups) {
    const auto rels = detail::split_list(node.data());
    out[name].insert(rels.begin(), rels.end());
  }
  return out;
}

inline RelationGroups load_groups_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open relation groups file: " + path);
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ParseError(path + ": " + e.message(), e.line());
  }
  if (auto g = tree.get_child_optional("groups")) return parse_groups(*g);
  return parse_groups(tree);
}

/// Interprets a grid-free tree. Throws ConfigError on unknown keys and bad values.
inline RunConfig run_config_from_tree(const pt::ptree& tree, const std::filesystem::path& base_dir = ".") {
  using namespace detail;
  RunConfig c;
  c.base_dir = base_dir;
  c.raw = tree;
  for (const auto& [section, node] : tree) {
    if (!node.empty()) continue;
    throw ConfigError("top-level key '" + section + "' must live inside a section");
  }
  static const std::set<std::string> kSections = {"run",       "data",      "sources",   "split",
                                                  "groups",    "model",     "sampler",   "optimizer",
                                                  "alignment", "train",     "evaluate"};
  for (const auto& [section, node] : tree)
    if (!kSections.contains(section)) throw ConfigError("unknown section [" + section + "]");

  {
    SectionReader s(tree, "run");
    s.on("seed", [&](auto v, auto k) { c.seed = parse_number<std::uint64_t>(k, v); });
    s.on("out", [&](auto v, auto) { c.out_dir = v; });
    s.on("threads", [&](auto v, auto k) { c.threads = parse_number<std::size_t>(k, v); });
    s.finish();
  }
  c.evaluation.seed = derive_seed(c.seed, {0x45});
  {
    SectionReader s(tree, "data");
    s.on("hin", [&](auto v, auto) { c.hin_path = v; });
    s.on("entity_types", [&](auto v, auto) { c.entity_types_path = v; });
    s.on("relation_types", [&](auto v, auto) { c.relation_types_path = v; });
    s.finish();
  }
  if (auto src = tree.get_child_optional("sources"))
    for (const auto& [name, node] : *src) c.sources[name] = trim(node.data());
  {
    SectionReader s(tree, "split");
    s.on("inputs", [&](auto v, auto) { c.split_inputs = split_list(v); });
    s.on("groups_file", [&](auto v, auto) { c.groups = load_groups_file(c.resolve(v).string()); });
    s.finish();
  }
  if (auto g = tree.get_child_optional("groups")) {
    for (auto& [name, rels] : parse_groups(*g)) c.groups[name] = rels;
  }
  if (!c.sources.empty() && !c.split_inputs.empty())
    throw ConfigError("use either [sources] or [split], not both");
  if (!c.split_inputs.empty() && c.groups.empty()) throw ConfigError("[split] needs relation groups");

  auto& t = c.train;
  {
    SectionReader s(tree, "model");
    s.on("kind", [&](auto v, auto) { t.model.kind = parse_model_kind(v); });
    s.on("norm", [&](auto v, auto k) { t.model.norm = parse_number<int>(k, v); });
    s.on("margin", [&](auto v, auto k) { t.model.margin = parse_number<double>(k, v); });
    s.on("dim", [&](auto v, auto k) { t.dim = parse_number<std::size_t>(k, v); });
    s.finish();
  }
  {
    SectionReader s(tree, "sampler");
    s.on("batch_size", [&](auto v, auto k) { t.sampler.batch_size = parse_number<std::size_t>(k, v); });
    s.on("negatives", [&](auto v, auto k) { t.sampler.negatives_per_positive = parse_number<std::size_t>(k, v); });
    s.on("head_tail_prob", [&](auto v, auto k) { t.sampler.head_tail_prob = parse_number<double>(k, v); });
    s.on("filter_true", [&](auto v, auto k) { t.sampler.filter_true = parse_bool(k, v); });
    s.finish();
  }
  {
    SectionReader s(tree, "optimizer");
    apply_optimizer(s, t.optimizer);
    s.finish();
  }
  {
    SectionReader s(tree, "alignment");
    auto& a = t.alignment;
    s.on("kind", [&](auto v, auto) { a.kind = parse_alignment_kind(v); });
    s.on("lambda", [&](auto v, auto k) { a.lambda = parse_number<double>(k, v); });
    s.on("bandwidth", [&](auto v, auto k) {
      a.mmd_bandwidth = v == "median" ? Bandwidth::median() : Bandwidth::fixed(parse_number<double>(k, v));
    });
    s.on("hist_bins", [&](auto v, auto k) { a.hist_bins = parse_number<std::size_t>(k, v); });
    s.on("hist_smoothing", [&](auto v, auto k) { a.hist_smoothing = parse_number<double>(k, v); });
    s.on("adversarial_target", [&](auto v, auto k) {
      if (v == "uniform")
        a.adversarial_target = AdversarialTarget::Uniform;
      else if (v == "flip")
        a.adversarial_target = AdversarialTarget::Flip;
      else
        throw ConfigError("invalid value for '" + std::string(k) + "': " + std::string(v));
    });
    s.on("discriminator_hidden", [&](auto v, auto k) { a.discriminator_hidden = parse_sizes(k, v); });
    s.on("discriminator_steps", [&](auto v, auto k) {
      t.discriminator_steps_per_batch = parse_number<std::size_t>(k, v);
    });
    apply_optimizer(s, t.discriminator_optimizer, "discriminator_");
    s.finish();
  }
  {
    SectionReader s(tree, "train");
    s.on("epochs", [&](auto v, auto k) { t.epochs = parse_number<std::size_t>(k, v); });
    s.on("checkpoint_every", [&](auto v, auto k) { t.checkpoint_every = parse_number<std::size_t>(k, v); });
    s.on("resume", [&](auto v, auto k) { c.resume = parse_bool(k, v); });
    s.finish();
  }
  {
    SectionReader s(tree, "evaluate");
    auto& e = c.evaluation;
    s.on("arrow", [&](auto v, auto) { std::tie(e.train_source, e.test_source) = parse_arrow(v); });
    s.on("hits", [&](auto v, auto k) { e.hits_ns = parse_sizes(k, v); });
    s.on("negatives", [&](auto v, auto k) { e.n_negatives = parse_number<std::size_t>(k, v); });
    s.on("max_test_edges", [&](auto v, auto k) { e.max_test_edges = parse_number<std::size_t>(k, v); });
    s.on("filtered", [&](auto v, auto k) { e.filtered = parse_bool(k, v); });
    s.on("seed", [&](auto v, auto k) { e.seed = parse_number<std::uint64_t>(k, v); });
    s.on("matcher_hidden", [&](auto v, auto k) { e.matcher.hidden = parse_sizes(k, v); });
    s.on("matcher_negatives", [&](auto v, auto k) {
      e.matcher.negatives_per_positive = parse_number<std::size_t>(k, v);
    });
    s.on("matcher_epochs", [&](auto v, auto k) { e.matcher.fit.epochs = parse_number<std::size_t>(k, v); });
    s.on("matcher_batch_size", [&](auto v, auto k) { e.matcher.fit.batch_size = parse_number<std::size_t>(k, v); });
    apply_optimizer(s, e.matcher.fit.optimizer, "matcher_");
    s.on("labels", [&](auto v, auto) { e.labels_path = v; });
    s.on("label_train_fraction", [&](auto v, auto k) { e.label_train_fraction = parse_number<double>(k, v); });
    s.on("classifier_hidden", [&](auto v, auto k) { e.classifier.hidden = parse_sizes(k, v); });
    s.on("classifier_epochs", [&](auto v, auto k) { e.classifier.fit.epochs = parse_number<std::size_t>(k, v); });
    apply_optimizer(s, e.classifier.fit.optimizer, "classifier_");
    s.finish();
  }
  t.seed = c.seed;
  t.threads = c.threads;
  c.evaluation.matcher.seed = derive_seed(c.seed, {0x4d});
  c.evaluation.classifier.seed = derive_seed(c.seed, {0x43});
  t.validate();
  if (!(c.evaluation.label_train_fraction > 0.0 && c.evaluation.label_train_fraction <= 1.0))
    throw ConfigError("label_train_fraction must be in (0, 1]");
  return c;
}

/// One point of a configuration grid: the tree with every bracketed value
/// replaced by a single choice, plus a directory label such as "alignment.lambda=10".
struct GridPoint {
  std::string label;
  pt::ptree tree;
};

/// Cartesian product over every bracketed value in the tree (in section/key
/// order). A grid-free tree yields exactly one point with an empty label.
inline std::vector<GridPoint> expand_grid(const pt::ptree& tree) {
  std::vector<GridPoint> points{{"", tree}};
  for (const auto& [section, node] : tree) {
    for (const auto& [key, value] : node) {
      if (!detail::is_grid_value(value.data())) continue;
      const auto inner = detail::trim(value.data());
      const auto choices = detail::split_list(inner.substr(1, inner.size() - 2));
      if (choices.empty()) throw ConfigError("empty grid for " + section + "." + key);
      std::vector<GridPoint> next;
      for (const auto& p : points)
        for (const auto& choice : choices) {
          GridPoint q = p;
          q.tree.put(pt::ptree::path_type(section + '\x01' + key, '\x01'), choice);
          q.label += (q.label.empty() ? "" : ",") + section + "." + key + "=" + choice;
          next.push_back(std::move(q));
        }
      points = std::move(next);
    }
  }
  return points;
}

inline pt::ptree read_config_tree(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(path.string() + ":" + std::to_string(e.line()) + ": " + e.message());
  }
  return tree;
}

inline nlohmann::json tree_to_json(const pt::ptree& tree) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [k, v] : tree) j[k] = v.empty() ? nlohmann::json(v.data()) : tree_to_json(v);
  return j;
}

// Dataset assembly ----------------------------------------------------------

inline TypeAssignments load_type_assignments(const RunConfig& c) {
  TypeAssignments types;
  auto load = [&](const std::optional<std::string>& p, auto& dst) {
    if (!p) return;
    const auto path = c.resolve(*p).string();
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open type file: " + path);
    dst = parse_type_file(in, path);
  };
  load(c.entity_types_path, types.entity_types);
  load(c.relation_types_path, types.relation_types);
  return types;
}

/// Builds the HIN from [sources] or from [split] inputs + relation groups.
inline Hin build_hin_from_config(const RunConfig& c) {
  SourceManifest manifest;
  if (!c.split_inputs.empty()) {
    std::vector<RawTriple> all;
    for (const auto& in : c.split_inputs) {
      auto part = parse_triple_file(c.resolve(in).string());
      all.insert(all.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
    }
    manifest = split_by_relation(all, c.groups);
  } else if (!c.sources.empty()) {
    for (const auto& [name, path] : c.sources) manifest[name] = parse_triple_file(c.resolve(path).string());
  } else {
    throw ConfigError("no dataset: give [sources], [split] or [data] hin");
  }
  return build_hin(manifest, load_type_assignments(c));
}

inline Hin load_or_build_hin(const RunConfig& c) {
  if (c.hin_path) return load_hin(c.resolve(*c.hin_path).string());
  return build_hin_from_config(c);
}

}  // namespace sumshine
