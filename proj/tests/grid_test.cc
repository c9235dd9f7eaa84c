// Copyright 2026 The latentlens authors
// SPDX-License-Identifier: Apache-2.0

#include "latentlens/grid.h"

#include <doctest.h>

#include <filesystem>
#include <set>

#include "latentlens/error.h"
#include "latentlens/io_util.h"
#include "test_util.h"

using namespace latentlens;
using latentlens::testing::random_corpus;
using latentlens::testing::TempDir;

namespace {

GridSpec small_spec(const std::filesystem::path& out) {
  GridSpec spec;
  spec.latent_dims = {8, 16};
  spec.k_values = {4};
  spec.base.input_dim = 6;
  spec.base.epochs = 2;
  spec.base.batch_size = 16;
  spec.base.seed = 5;
  spec.output_dir = out;
  return spec;
}

}  // namespace

TEST_CASE("grid trains one checkpoint per valid cell") {
  TempDir tmp("grid_cells");
  const EmbeddingCorpus train_c = random_corpus(96, 6, 71, false);
  const EmbeddingCorpus val_c = random_corpus(24, 6, 72, false);
  const GridResult result = run_grid(small_spec(tmp.path()), train_c, val_c);

  REQUIRE(result.cells.size() == 2);
  for (const auto& cell : result.cells) {
    CHECK(cell.status == CellStatus::kCompleted);
    CHECK(std::filesystem::exists(cell.checkpoint_path));
    CHECK(std::filesystem::exists(cell.stats_path));
    const SaeModel model = load_model_file(cell.checkpoint_path);
    CHECK(model.config.latent_dim == cell.latent_dim);
    CHECK(model.config.topk == cell.k);
  }
  CHECK(std::filesystem::exists(tmp.path() / "manifest.json"));
  CHECK(std::filesystem::exists(tmp.path() / "summary.csv"));
}

TEST_CASE("cells with k > L are skipped and logged") {
  TempDir tmp("grid_skip");
  GridSpec spec = small_spec(tmp.path());
  spec.latent_dims = {10};
  spec.k_values = {20};
  const EmbeddingCorpus train_c = random_corpus(48, 6, 73, false);
  const EmbeddingCorpus val_c = random_corpus(12, 6, 74, false);
  const GridResult result = run_grid(spec, train_c, val_c);
  REQUIRE(result.cells.size() == 1);
  CHECK(result.cells[0].status == CellStatus::kSkippedInvalid);
  CHECK(!result.cells[0].error.empty());
  CHECK(!std::filesystem::exists(result.cells[0].checkpoint_path));
}

TEST_CASE("worker count does not change the checkpoints") {
  const EmbeddingCorpus train_c = random_corpus(96, 6, 75, false);
  const EmbeddingCorpus val_c = random_corpus(24, 6, 76, false);

  TempDir tmp1("grid_w1"), tmp4("grid_w4");
  GridSpec one = small_spec(tmp1.path());
  one.k_values = {2, 4};
  one.parallel_workers = 1;
  GridSpec four = small_spec(tmp4.path());
  four.k_values = {2, 4};
  four.parallel_workers = 4;

  run_grid(one, train_c, val_c);
  run_grid(four, train_c, val_c);
  for (const char* cell : {"8_2", "8_4", "16_2", "16_4"}) {
    const auto rel = std::filesystem::path(cell);
    CHECK(read_file(tmp1.path() / rel / "model.saec") ==
          read_file(tmp4.path() / rel / "model.saec"));
    CHECK(read_file(tmp1.path() / rel / "stats.json") ==
          read_file(tmp4.path() / rel / "stats.json"));
  }
}

TEST_CASE("existing checkpoints are resumed, not retrained") {
  TempDir tmp("grid_resume");
  const EmbeddingCorpus train_c = random_corpus(96, 6, 77, false);
  const EmbeddingCorpus val_c = random_corpus(24, 6, 78, false);
  const GridSpec spec = small_spec(tmp.path());

  const GridResult first = run_grid(spec, train_c, val_c);
  const std::string bytes_before = read_file(first.cells[0].checkpoint_path);
  const auto mtime_before =
      std::filesystem::last_write_time(first.cells[0].checkpoint_path);

  const GridResult second = run_grid(spec, train_c, val_c);
  CHECK(second.cells[0].status == CellStatus::kResumed);
  CHECK(second.cells[1].status == CellStatus::kResumed);
  CHECK(read_file(second.cells[0].checkpoint_path) == bytes_before);
  CHECK(std::filesystem::last_write_time(second.cells[0].checkpoint_path) ==
        mtime_before);
  CHECK(!second.cells[0].stats.val_mse.empty());
}

TEST_CASE("a corrupt checkpoint is retrained on resume") {
  TempDir tmp("grid_corrupt");
  const EmbeddingCorpus train_c = random_corpus(96, 6, 79, false);
  const EmbeddingCorpus val_c = random_corpus(24, 6, 80, false);
  const GridSpec spec = small_spec(tmp.path());

  const GridResult first = run_grid(spec, train_c, val_c);
  const std::string good = read_file(first.cells[0].checkpoint_path);
  atomic_write_file(first.cells[0].checkpoint_path, good.substr(0, good.size() / 2));

  const GridResult second = run_grid(spec, train_c, val_c);
  CHECK(second.cells[0].status == CellStatus::kCompleted);
  CHECK(read_file(second.cells[0].checkpoint_path) == good);
}

TEST_CASE("distinct cells receive distinct derived seeds") {
  std::set<uint64_t> seeds;
  for (int l : {8, 16, 100, 200, 1200}) {
    for (int k : {2, 4, 5, 20, 35}) {
      seeds.insert(derive_cell_seed(42, l, k));
    }
  }
  CHECK(seeds.size() == 25);
  CHECK(derive_cell_seed(42, 8, 2) == derive_cell_seed(42, 8, 2));
  CHECK(derive_cell_seed(42, 8, 2) != derive_cell_seed(43, 8, 2));
}

TEST_CASE("manifest roundtrips through json") {
  TempDir tmp("grid_manifest");
  const EmbeddingCorpus train_c = random_corpus(96, 6, 81, false);
  const EmbeddingCorpus val_c = random_corpus(24, 6, 82, false);
  GridSpec spec = small_spec(tmp.path());
  spec.latent_dims = {8, 16};
  spec.k_values = {4, 20};  // `8_20` and `16_20` are invalid cells
  const GridResult result = run_grid(spec, train_c, val_c);

  const GridResult back = read_manifest(tmp.path());
  REQUIRE(back.cells.size() == result.cells.size());
  for (size_t i = 0; i < back.cells.size(); ++i) {
    CHECK(back.cells[i].latent_dim == result.cells[i].latent_dim);
    CHECK(back.cells[i].k == result.cells[i].k);
    CHECK(back.cells[i].status == result.cells[i].status);
  }
  CHECK(back.find(8, 4) != nullptr);
  CHECK(back.find(8, 20)->status == CellStatus::kSkippedInvalid);
  CHECK(back.find(9, 9) == nullptr);
}

TEST_CASE("summary has one row per cell and matches the stats on disk") {
  TempDir tmp("grid_summary");
  const EmbeddingCorpus train_c = random_corpus(96, 6, 83, false);
  const EmbeddingCorpus val_c = random_corpus(24, 6, 84, false);
  const GridResult result = run_grid(small_spec(tmp.path()), train_c, val_c);

  const std::string csv = summarize(result);
  const size_t rows = std::count(csv.begin(), csv.end(), '\n');
  CHECK(rows == 1 + result.cells.size());

  for (const auto& cell : result.cells) {
    const TrainStats stats = train_stats_from_json_text(read_file(cell.stats_path));
    CHECK(csv.find(std::to_string(stats.val_mse.back())) != std::string::npos);
  }
}

TEST_CASE("empty grid summary is header-only") {
  GridResult empty;
  const std::string csv = summarize(empty);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 1);
  CHECK(csv.rfind("latent_dim,k,", 0) == 0);
}

TEST_CASE("train stats json roundtrips") {
  TrainStats stats;
  stats.train_mse = {0.5, 0.25};
  stats.val_mse = {0.6, 0.3};
  stats.dead_latent_count = {3, 1};
  stats.initial_val_mse = 0.9;
  stats.epochs_completed = 2;
  const TrainStats back = train_stats_from_json_text(train_stats_to_json_text(stats));
  CHECK(back.train_mse == stats.train_mse);
  CHECK(back.val_mse == stats.val_mse);
  CHECK(back.dead_latent_count == stats.dead_latent_count);
  CHECK(back.initial_val_mse == stats.initial_val_mse);
  CHECK(back.epochs_completed == 2);
  CHECK_THROWS_AS(train_stats_from_json_text("{"), FormatError);
}
