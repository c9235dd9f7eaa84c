// Copyright 2026 The latentlens authors
// SPDX-License-Identifier: Apache-2.0

#include "latentlens/grid.h"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <set>
#include <thread>

#include <json.hpp>

#include "latentlens/error.h"
#include "latentlens/io_util.h"

namespace latentlens {

void GridSpec::validate() const {
  if (latent_dims.empty()) throw ValidationError("grid: latent_dims is empty");
  if (k_values.empty()) throw ValidationError("grid: k_values is empty");
  for (int l : latent_dims) {
    if (l < 1) throw ValidationError("grid: latent_dim must be >= 1");
  }
  for (int k : k_values) {
    if (k < 1) throw ValidationError("grid: k must be >= 1");
  }
  if (parallel_workers < 1) throw ValidationError("grid: parallel_workers must be >= 1");
  if (output_dir.empty()) throw ValidationError("grid: output_dir is empty");
  SaeConfig probe = base;
  probe.latent_dim = *std::max_element(latent_dims.begin(), latent_dims.end());
  probe.topk = 1;
  probe.validate();
}

const GridCell* GridResult::find(int latent_dim, int k) const {
  for (const auto& cell : cells) {
    if (cell.latent_dim == latent_dim && cell.k == k) return &cell;
  }
  return nullptr;
}

uint64_t derive_cell_seed(uint64_t base_seed, int latent_dim, int k) {
  uint64_t h = fnv1a64(&base_seed, sizeof(base_seed));
  const uint64_t l64 = static_cast<uint64_t>(latent_dim);
  const uint64_t k64 = static_cast<uint64_t>(k);
  h = fnv1a64(&l64, sizeof(l64), h);
  h = fnv1a64(&k64, sizeof(k64), h);
  return h;
}

std::string train_stats_to_json_text(const TrainStats& stats) {
  nlohmann::json j{{"train_mse", stats.train_mse},
                   {"val_mse", stats.val_mse},
                   {"dead_latent_count", stats.dead_latent_count},
                   {"initial_val_mse", stats.initial_val_mse},
                   {"epochs_completed", stats.epochs_completed}};
  return j.dump(2) + "\n";
}

TrainStats train_stats_from_json_text(const std::string& text) {
  TrainStats stats;
  try {
    const auto j = nlohmann::json::parse(text);
    stats.train_mse = j.at("train_mse").get<std::vector<double>>();
    stats.val_mse = j.at("val_mse").get<std::vector<double>>();
    stats.dead_latent_count = j.at("dead_latent_count").get<std::vector<int>>();
    stats.initial_val_mse = j.at("initial_val_mse").get<double>();
    stats.epochs_completed = j.at("epochs_completed").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("invalid stats json: ") + e.what());
  }
  return stats;
}

namespace {

std::string cell_dir_name(int latent_dim, int k) {
  return std::to_string(latent_dim) + "_" + std::to_string(k);
}

const char* status_name(CellStatus status) {
  switch (status) {
    case CellStatus::kCompleted: return "completed";
    case CellStatus::kResumed: return "resumed";
    case CellStatus::kSkippedInvalid: return "skipped";
    case CellStatus::kFailed: return "failed";
  }
  return "failed";
}

CellStatus status_from_name(const std::string& name) {
  if (name == "completed") return CellStatus::kCompleted;
  if (name == "resumed") return CellStatus::kResumed;
  if (name == "skipped") return CellStatus::kSkippedInvalid;
  if (name == "failed") return CellStatus::kFailed;
  throw FormatError("unknown cell status '" + name + "'");
}

// Attempts to reuse an existing checkpoint; returns true when it is valid
// and matches the cell.
bool try_resume(GridCell& cell) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (!fs::exists(cell.checkpoint_path, ec) || !fs::exists(cell.stats_path, ec)) {
    return false;
  }
  try {
    const SaeModel model = load_model_file(cell.checkpoint_path);
    if (model.config.latent_dim != cell.latent_dim ||
        model.config.activation != ActivationKind::kTopK ||
        model.config.topk != cell.k) {
      return false;
    }
    cell.stats = train_stats_from_json_text(read_file(cell.stats_path));
    return true;
  } catch (const std::exception&) {
    return false;
  }
}

void run_cell(const GridSpec& spec, GridCell& cell,
              const EmbeddingCorpus& train_corpus,
              const EmbeddingCorpus& val_corpus) {
  const auto t0 = std::chrono::steady_clock::now();
  if (cell.k > cell.latent_dim) {
    cell.status = CellStatus::kSkippedInvalid;
    cell.error = "k > latent_dim";
  } else {
    try {
      if (try_resume(cell)) {
        cell.status = CellStatus::kResumed;
      } else {
        SaeConfig config = spec.base;
        config.latent_dim = cell.latent_dim;
        config.activation = ActivationKind::kTopK;
        config.topk = cell.k;
        config.seed = derive_cell_seed(spec.base.seed, cell.latent_dim, cell.k);
        auto [model, stats] = train(config, train_corpus, val_corpus);
        save_model_file(model, cell.checkpoint_path);
        atomic_write_file(cell.stats_path, train_stats_to_json_text(stats));
        cell.stats = std::move(stats);
        cell.status = CellStatus::kCompleted;
      }
    } catch (const std::exception& e) {
      cell.status = CellStatus::kFailed;
      cell.error = e.what();
    }
  }
  cell.wall_clock_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

GridResult run_grid(const GridSpec& spec, const EmbeddingCorpus& train_corpus,
                    const EmbeddingCorpus& val_corpus) {
  spec.validate();
  std::filesystem::create_directories(spec.output_dir);

  GridResult result;
  result.output_dir = spec.output_dir;
  std::set<std::pair<int, int>> seen;
  for (int l : spec.latent_dims) {
    for (int k : spec.k_values) {
      if (!seen.insert({l, k}).second) continue;
      GridCell cell;
      cell.latent_dim = l;
      cell.k = k;
      const auto dir = spec.output_dir / cell_dir_name(l, k);
      cell.checkpoint_path = dir / "model.saec";
      cell.stats_path = dir / "stats.json";
      result.cells.push_back(std::move(cell));
    }
  }
  std::sort(result.cells.begin(), result.cells.end(),
            [](const GridCell& a, const GridCell& b) {
              return std::tie(a.latent_dim, a.k) < std::tie(b.latent_dim, b.k);
            });

  const int workers =
      std::min<int>(spec.parallel_workers, static_cast<int>(result.cells.size()));
  if (workers <= 1) {
    for (auto& cell : result.cells) run_cell(spec, cell, train_corpus, val_corpus);
  } else {
    std::atomic<size_t> next{0};
    auto worker = [&] {
      while (true) {
        const size_t i = next.fetch_add(1);
        if (i >= result.cells.size()) return;
        run_cell(spec, result.cells[i], train_corpus, val_corpus);
      }
    };
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(workers));
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  write_manifest(result);
  write_summary(result);
  return result;
}

void write_manifest(const GridResult& result) {
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& cell : result.cells) {
    cells.push_back(
        {{"latent_dim", cell.latent_dim},
         {"k", cell.k},
         {"status", status_name(cell.status)},
         {"error", cell.error},
         {"checkpoint", cell_dir_name(cell.latent_dim, cell.k) + "/model.saec"},
         {"stats", cell_dir_name(cell.latent_dim, cell.k) + "/stats.json"},
         {"wall_clock_s", cell.wall_clock_s}});
  }
  const nlohmann::json manifest{{"cells", std::move(cells)}};
  atomic_write_file(result.output_dir / "manifest.json", manifest.dump(2) + "\n");
}

GridResult read_manifest(const std::filesystem::path& output_dir) {
  GridResult result;
  result.output_dir = output_dir;
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(read_file(output_dir / "manifest.json"));
    for (const auto& jc : manifest.at("cells")) {
      GridCell cell;
      cell.latent_dim = jc.at("latent_dim").get<int>();
      cell.k = jc.at("k").get<int>();
      cell.status = status_from_name(jc.at("status").get<std::string>());
      cell.error = jc.at("error").get<std::string>();
      cell.checkpoint_path = output_dir / jc.at("checkpoint").get<std::string>();
      cell.stats_path = output_dir / jc.at("stats").get<std::string>();
      cell.wall_clock_s = jc.at("wall_clock_s").get<double>();
      if (cell.status == CellStatus::kCompleted || cell.status == CellStatus::kResumed) {
        cell.stats = train_stats_from_json_text(read_file(cell.stats_path));
      }
      result.cells.push_back(std::move(cell));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("invalid grid manifest: " + std::string(e.what()));
  }
  return result;
}

std::string summarize(const GridResult& result) {
  std::string csv = "latent_dim,k,status,final_val_mse,dead_latents,wall_clock_s,checkpoint\n";
  for (const auto& cell : result.cells) {
    const bool trained =
        cell.status == CellStatus::kCompleted || cell.status == CellStatus::kResumed;
    csv += std::to_string(cell.latent_dim) + "," + std::to_string(cell.k) + "," +
           status_name(cell.status) + ",";
    if (trained && !cell.stats.val_mse.empty()) {
      csv += std::to_string(cell.stats.val_mse.back()) + "," +
             std::to_string(cell.stats.final_dead_latents());
    } else {
      csv += "absent,absent";
    }
    csv += "," + std::to_string(cell.wall_clock_s) + ",";
    csv += trained ? cell_dir_name(cell.latent_dim, cell.k) + "/model.saec" : "absent";
    csv += "\n";
  }
  return csv;
}

void write_summary(const GridResult& result) {
  atomic_write_file(result.output_dir / "summary.csv", summarize(result));
}

}  // namespace latentlens
