// Copyright 2026 The latentlens authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>

#include <json.hpp>

namespace latentlens {

// Stable CLI exit code contract.
struct ExitCode {
  static constexpr int kOk = 0;
  static constexpr int kError = 1;    // internal/module failure
  static constexpr int kConfig = 2;   // bad config file, flags, or spec
  static constexpr int kMissing = 3;  // missing upstream artifact
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class MissingArtifactError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Merged command options: config file values overridden by CLI flags.
struct RunOptions {
  std::filesystem::path out;  // output root
  nlohmann::json config;      // parsed --config file ({} when absent)
  std::optional<uint64_t> seed_override;
  std::optional<int> workers_override;
  bool verbose = false;

  // per-command path/value overrides
  std::optional<std::filesystem::path> spec_path;
  std::optional<std::filesystem::path> corpus_path;
  std::optional<std::filesystem::path> labels_path;
  std::optional<std::filesystem::path> model_path;
  std::optional<std::filesystem::path> grid_dir;
  std::optional<std::filesystem::path> probe_path;
  std::string attr;
  std::optional<int> k_filter;

  uint64_t seed() const;
  int workers() const;
};

// Loads and validates the --config JSON; missing file is a config error.
nlohmann::json load_config_file(const std::filesystem::path& path);

// Resolves the default output root: $LATENT_LENS_OUT or the cwd.
std::filesystem::path default_out_root();

// Pipeline stages. Each writes its artifacts under options.out plus an entry
// in run_meta.json, and returns a process exit code.
int cmd_synth(const RunOptions& options);
int cmd_train(const RunOptions& options);
int cmd_grid(const RunOptions& options);
int cmd_probe(const RunOptions& options);
int cmd_steer(const RunOptions& options);
int cmd_split(const RunOptions& options);
int cmd_export(const RunOptions& options);

}  // namespace latentlens
