// Copyright 2026 The latentlens authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "latentlens/corpus.h"
#include "latentlens/sae.h"

namespace latentlens {

struct GridSpec {
  std::vector<int> latent_dims;
  std::vector<int> k_values;
  SaeConfig base;  // latent_dim/topk/seed are overridden per cell
  std::filesystem::path output_dir;
  int parallel_workers = 1;

  void validate() const;
};

enum class CellStatus { kCompleted, kResumed, kSkippedInvalid, kFailed };

struct GridCell {
  int latent_dim = 0;
  int k = 0;
  CellStatus status = CellStatus::kFailed;
  std::string error;
  std::filesystem::path checkpoint_path;
  std::filesystem::path stats_path;
  TrainStats stats;         // empty for skipped/failed cells
  double wall_clock_s = 0.0;
};

struct GridResult {
  std::filesystem::path output_dir;
  std::vector<GridCell> cells;  // ordered by (latent_dim, k)

  const GridCell* find(int latent_dim, int k) const;
};

// Per-cell training seed: mixes (base_seed, L, k) so distinct cells get
// uncorrelated, reproducible streams.
uint64_t derive_cell_seed(uint64_t base_seed, int latent_dim, int k);

// Trains every valid (L, k) cell into `<out>/<L>_<k>/{model.saec,stats.json}`.
// Cells with k > L are skipped and logged; cells whose checkpoint already
// loads cleanly are resumed without retraining; per-cell failures are
// recorded in the manifest without aborting the sweep. Output is identical
// for any worker count.
GridResult run_grid(const GridSpec& spec, const EmbeddingCorpus& train_corpus,
                    const EmbeddingCorpus& val_corpus);

// `<out>/manifest.json` round-trip, so sweeps are resumable and inspectable.
void write_manifest(const GridResult& result);
GridResult read_manifest(const std::filesystem::path& output_dir);

// One CSV row per manifest cell: L, k, status, final val MSE, dead latents,
// runtime, checkpoint path. Missing checkpoints are recorded as absent.
std::string summarize(const GridResult& result);
void write_summary(const GridResult& result);  // <out>/summary.csv

TrainStats train_stats_from_json_text(const std::string& text);
std::string train_stats_to_json_text(const TrainStats& stats);

}  // namespace latentlens
