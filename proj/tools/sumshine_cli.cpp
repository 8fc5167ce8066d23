// Copyright (c) 2026, The Sumshine Authors
// SPDX-License-Identifier: Apache-2.0

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "sumshine/commands.hpp"

namespace {

using namespace sumshine;

constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;

std::string grid_dir_name(std::string label) {
  for (char& c : label)
    if (c == '/' || c == '\\' || c == ' ') c = '_';
  return label;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-source heterogeneous graph embedding"};
  app.require_subcommand(1);
  std::string config_path;
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
  std::optional<std::string> store;
  app.add_option("--config", config_path, "run configuration (INI)")->required();
  app.add_option("--out", out_dir, "output directory (overrides [run] out)");
  app.add_option("--seed", seed, "random seed (overrides [run] seed)");
  app.add_option("--threads", threads, "worker threads for per-source gradients")->check(CLI::PositiveNumber);

  app.add_subcommand("prepare", "ingest sources and write hin.bin + stats.csv");
  app.add_subcommand("train", "train embeddings; resumes from <out>/checkpoints");
  for (auto* sub : {app.add_subcommand("evaluate", "link prediction across sources and node classification"),
                    app.add_subcommand("report", "per-source statistics and embedding divergence"),
                    app.add_subcommand("export", "write entity and relation embeddings as CSV")})
    sub->add_option("--store", store, "embedding store (default <out>/final.emb)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }
  const std::string command = app.get_subcommands().front()->get_name();

  try {
    const auto config_file = std::filesystem::absolute(config_path);
    auto tree = read_config_tree(config_file);
    if (seed) tree.put("run.seed", std::to_string(*seed));
    if (threads) tree.put("run.threads", std::to_string(*threads));
    const auto points = expand_grid(tree);
    for (const auto& point : points) {
      CommandContext ctx;
      ctx.config = run_config_from_tree(point.tree, config_file.parent_path());
      ctx.command = command;
      ctx.grid_label = point.label;
      ctx.out_dir = out_dir ? std::filesystem::path(*out_dir) : ctx.config.resolve(ctx.config.out_dir.string());
      if (!point.label.empty()) ctx.out_dir /= grid_dir_name(point.label);
      if (store) ctx.store_path = std::filesystem::path(*store);
      if (points.size() > 1) std::cerr << "== " << point.label << '\n';
      if (command == "prepare")
        run_prepare(ctx);
      else if (command == "train")
        run_train(ctx);
      else if (command == "evaluate")
        run_evaluate(ctx);
      else if (command == "report")
        run_report(ctx);
      else
        run_export(ctx);
    }
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const ParseError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const FormatError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return 0;
}
