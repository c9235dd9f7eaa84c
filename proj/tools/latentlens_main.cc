// Copyright 2026 The latentlens authors
// SPDX-License-Identifier: Apache-2.0
//
// latentlens: train sparse autoencoders over embedding corpora, identify
// mono-semantic latent features with logistic-regression probes, steer them,
// and track feature splitting across latent dimensions.

#include <CLI11.hpp>
#include <string>

#include "latentlens/commands.h"

namespace {

struct FlagState {
  std::string config_path;
  std::string out;
  std::string spec, corpus, labels, model, grid, probe;
  std::string attr;
  uint64_t seed = 0;
  int workers = 0;
  int k = 0;
  bool verbose = false;
};

void add_common(CLI::App* cmd, FlagState& flags) {
  cmd->add_option("--config", flags.config_path, "JSON config file");
  cmd->add_option("--out", flags.out,
                  "output directory (default: $LATENT_LENS_OUT or cwd)");
  cmd->add_option("--seed", flags.seed, "global seed override");
  cmd->add_option("--workers", flags.workers, "parallel workers");
  cmd->add_flag("--verbose", flags.verbose, "verbose progress on stderr");
}

latentlens::RunOptions build_options(const CLI::App* cmd, const FlagState& flags) {
  latentlens::RunOptions options;
  if (!flags.config_path.empty()) {
    options.config = latentlens::load_config_file(flags.config_path);
  }
  options.out = flags.out.empty()
                    ? (options.config.contains("out")
                           ? std::filesystem::path(
                                 options.config.at("out").get<std::string>())
                           : latentlens::default_out_root())
                    : std::filesystem::path(flags.out);
  std::filesystem::create_directories(options.out);
  if (cmd->count("--seed")) options.seed_override = flags.seed;
  if (cmd->count("--workers")) options.workers_override = flags.workers;
  options.verbose = flags.verbose;
  if (!flags.spec.empty()) options.spec_path = flags.spec;
  if (!flags.corpus.empty()) options.corpus_path = flags.corpus;
  if (!flags.labels.empty()) options.labels_path = flags.labels;
  if (!flags.model.empty()) options.model_path = flags.model;
  if (!flags.grid.empty()) options.grid_dir = flags.grid;
  if (!flags.probe.empty()) options.probe_path = flags.probe;
  options.attr = flags.attr;
  const auto* k_option = cmd->get_option_no_throw("--k");
  if (k_option && k_option->count() > 0) options.k_filter = flags.k;
  return options;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sparse autoencoder feature analysis for embedding corpora"};
  app.require_subcommand(1);
  FlagState flags;

  auto* synth = app.add_subcommand("synth", "generate a synthetic corpus with planted attributes");
  add_common(synth, flags);
  synth->add_option("--spec", flags.spec, "synth spec JSON (or config 'synth' section)");

  auto* train = app.add_subcommand("train", "train a single SAE");
  add_common(train, flags);
  train->add_option("--corpus", flags.corpus, "EMBC corpus path");

  auto* grid = app.add_subcommand("grid", "train a (latent_dim, k) sweep");
  add_common(grid, flags);
  grid->add_option("--corpus", flags.corpus, "EMBC corpus path");

  auto* probe = app.add_subcommand("probe", "find the latent index for a labeled attribute");
  add_common(probe, flags);
  probe->add_option("--corpus", flags.corpus, "EMBC corpus path");
  probe->add_option("--labels", flags.labels, "label CSV path");
  probe->add_option("--attr", flags.attr, "attribute name");
  probe->add_option("--model", flags.model, "SAE checkpoint path");
  probe->add_option("--grid", flags.grid, "probe every cell of this grid directory");

  auto* steer = app.add_subcommand("steer", "steer the probed feature and score the shift");
  add_common(steer, flags);
  steer->add_option("--corpus", flags.corpus, "EMBC corpus path");
  steer->add_option("--labels", flags.labels, "label CSV path");
  steer->add_option("--attr", flags.attr, "attribute name");
  steer->add_option("--model", flags.model, "SAE checkpoint path");
  steer->add_option("--probe", flags.probe, "probe result JSON path");

  auto* split = app.add_subcommand("split", "track feature splitting across a grid");
  add_common(split, flags);
  split->add_option("--corpus", flags.corpus, "EMBC corpus path");
  split->add_option("--labels", flags.labels, "label CSV with a stratum column");
  split->add_option("--attr", flags.attr, "attribute name");
  split->add_option("--grid", flags.grid, "grid directory");
  split->add_option("--k", flags.k, "restrict the analysis to one k");

  auto* exp = app.add_subcommand("export", "merge run artifacts into one report");
  add_common(exp, flags);

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) return latentlens::cmd_synth(build_options(synth, flags));
    if (train->parsed()) return latentlens::cmd_train(build_options(train, flags));
    if (grid->parsed()) return latentlens::cmd_grid(build_options(grid, flags));
    if (probe->parsed()) return latentlens::cmd_probe(build_options(probe, flags));
    if (steer->parsed()) return latentlens::cmd_steer(build_options(steer, flags));
    if (split->parsed()) return latentlens::cmd_split(build_options(split, flags));
    if (exp->parsed()) return latentlens::cmd_export(build_options(exp, flags));
  } catch (const latentlens::ConfigError& e) {
    std::fprintf(stderr, "latentlens: config error: %s\n", e.what());
    return latentlens::ExitCode::kConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "latentlens: %s\n", e.what());
    return latentlens::ExitCode::kError;
  }
  return latentlens::ExitCode::kConfig;
}
