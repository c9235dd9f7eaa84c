// Copyright 2026 The latentlens authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "latentlens/corpus.h"
#include "latentlens/probe.h"
#include "latentlens/sae.h"

namespace latentlens {

// Latent indices ranked by positive-class probe weight, largest first.
std::vector<std::pair<int, double>> top_indices(
    const SaeModel& model, const EmbeddingCorpus& corpus, const LabelSet& labels,
    const CorpusSplit& split, const ProbeConfig& config, int n);

struct FlowCellInfo {
  int latent_dim = 0;
  int k = 0;
  int overall_phi = -1;                       // probe on all positives
  std::map<std::string, int> stratum_phi;     // probe per stratum of positives
};

struct FlowEdge {
  size_t from_cell = 0;  // transition cells[from_cell] -> cells[from_cell+1]
  int from_index = -1;   // latent index, -1 = "none"
  int to_index = -1;
  bool label = false;
  std::string stratum;
  long count = 0;
};

// Tracks how each held-out labeled sample routes through the predominant
// attribute index as latent dimension grows. A sample is assigned to the
// model's phi when its activation there is positive, otherwise to "none".
struct FlowTable {
  std::vector<FlowCellInfo> cells;  // strictly increasing latent_dim, fixed k
  std::vector<std::string> tracked_ids;
  std::vector<bool> tracked_label;
  std::vector<std::string> tracked_stratum;
  std::vector<std::vector<int>> assignment;  // [cell][sample], -1 = none
  // activation at each stratum's dominant index: [cell][stratum][sample]
  std::vector<std::map<std::string, std::vector<double>>> stratum_activation;
  std::vector<FlowEdge> edges;

  long tracked_count() const { return static_cast<long>(tracked_ids.size()); }
};

FlowTable build_flows(const std::vector<SaeModel>& models,
                      const EmbeddingCorpus& corpus, const LabelSet& labels,
                      const CorpusSplit& split, const ProbeConfig& config);

struct SplitEvent {
  size_t cell = 0;
  int latent_dim = 0;
  std::string stratum_a, stratum_b;
  int index_a = -1, index_b = -1;
  // fraction of positives routed to each index that belong to its stratum
  double purity_a = 0.0, purity_b = 0.0;
};

struct SplitReport {
  std::vector<std::map<std::string, int>> dominant_by_stratum;  // per cell
  std::vector<SplitEvent> events;  // divergent cells, ascending latent_dim
  std::optional<int> split_latent_dim;  // smallest L where strata diverge
};

// Reports the smallest latent dimension at which per-stratum dominant
// indices diverge; empty report when strata always share one index.
SplitReport detect_splits(const FlowTable& flows);

nlohmann::json flow_table_to_json(const FlowTable& flows);
nlohmann::json split_report_to_json(const FlowTable& flows,
                                    const SplitReport& report);

}  // namespace latentlens
