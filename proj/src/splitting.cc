// Copyright 2026 The latentlens authors
// SPDX-License-Identifier: Apache-2.0

#include "latentlens/splitting.h"

#include <algorithm>
#include <map>
#include <set>
#include <tuple>

#include "latentlens/error.h"

namespace latentlens {

std::vector<std::pair<int, double>> top_indices(
    const SaeModel& model, const EmbeddingCorpus& corpus, const LabelSet& labels,
    const CorpusSplit& split, const ProbeConfig& config, int n) {
  if (n < 1) throw UsageError("top_indices: n must be >= 1");
  const ProbeResult probe = fit_probe(model, corpus, labels, split, config);
  std::vector<std::pair<int, double>> ranked;
  ranked.reserve(static_cast<size_t>(probe.weights.size()));
  for (Eigen::Index i = 0; i < probe.weights.size(); ++i) {
    ranked.emplace_back(static_cast<int>(i), probe.weights[i]);
  }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  ranked.resize(std::min<size_t>(ranked.size(), static_cast<size_t>(n)));
  return ranked;
}

namespace {

// Stratum values occurring among positive samples; samples without a
// stratum entry fall into "".
std::set<std::string> positive_strata(const LabelSet& labels) {
  std::set<std::string> strata;
  for (const auto& [id, positive] : labels.labels) {
    if (!positive) continue;
    auto it = labels.strata.find(id);
    strata.insert(it == labels.strata.end() ? std::string() : it->second);
  }
  return strata;
}

// Labels restricted to one stratum's positives versus all negatives.
LabelSet stratum_labels(const LabelSet& labels, const std::string& stratum) {
  LabelSet out;
  out.positive_label = labels.positive_label + "/" + stratum;
  for (const auto& [id, positive] : labels.labels) {
    if (positive) {
      auto it = labels.strata.find(id);
      const std::string& s =
          it == labels.strata.end() ? std::string() : it->second;
      if (s == stratum) out.labels[id] = true;
    } else {
      out.labels[id] = false;
    }
  }
  return out;
}

}  // namespace

FlowTable build_flows(const std::vector<SaeModel>& models,
                      const EmbeddingCorpus& corpus, const LabelSet& labels,
                      const CorpusSplit& split, const ProbeConfig& config) {
  if (models.size() < 2) throw UsageError("build_flows: need at least 2 models");
  for (size_t i = 0; i < models.size(); ++i) {
    if (models[i].config.input_dim != corpus.dim) {
      throw ShapeError("build_flows: model input_dim != corpus dim");
    }
    if (i > 0) {
      if (models[i].config.latent_dim <= models[i - 1].config.latent_dim) {
        throw UsageError("build_flows: models must have strictly increasing latent_dim");
      }
      if (models[i].config.topk != models[0].config.topk) {
        throw UsageError("build_flows: models must share one k");
      }
    }
  }
  if (!corpus.sample_ids) {
    throw UsageError("build_flows requires a corpus with sample ids");
  }

  FlowTable table;

  // tracked set: held-out labeled samples
  std::vector<Eigen::Index> tracked_rows;
  for (Eigen::Index row : split.test_indices) {
    const auto& id = (*corpus.sample_ids)[static_cast<size_t>(row)];
    auto it = labels.labels.find(id);
    if (it == labels.labels.end()) continue;
    tracked_rows.push_back(row);
    table.tracked_ids.push_back(id);
    table.tracked_label.push_back(it->second);
    auto st = labels.strata.find(id);
    table.tracked_stratum.push_back(st == labels.strata.end() ? std::string()
                                                              : st->second);
  }
  if (tracked_rows.empty()) {
    throw UsageError("build_flows: no labeled samples in the test partition");
  }

  const auto strata = positive_strata(labels);
  for (const auto& model : models) {
    FlowCellInfo cell;
    cell.latent_dim = model.config.latent_dim;
    cell.k = model.config.topk;
    cell.overall_phi = fit_probe(model, corpus, labels, split, config).phi;
    for (const auto& stratum : strata) {
      const LabelSet sub = stratum_labels(labels, stratum);
      cell.stratum_phi[stratum] = fit_probe(model, corpus, sub, split, config).phi;
    }

    const Eigen::MatrixXd latents = encode_rows(model, corpus, tracked_rows);
    std::vector<int> assignment(tracked_rows.size(), -1);
    std::map<std::string, std::vector<double>> activation;
    for (size_t s = 0; s < tracked_rows.size(); ++s) {
      const auto i = static_cast<Eigen::Index>(s);
      if (latents(i, cell.overall_phi) > 0.0) assignment[s] = cell.overall_phi;
      for (const auto& [stratum, phi] : cell.stratum_phi) {
        activation[stratum].push_back(latents(i, phi));
      }
    }
    table.cells.push_back(std::move(cell));
    table.assignment.push_back(std::move(assignment));
    table.stratum_activation.push_back(std::move(activation));
  }

  // aggregate transitions, stratified by label x stratum
  for (size_t c = 0; c + 1 < table.cells.size(); ++c) {
    std::map<std::tuple<int, int, bool, std::string>, long> counts;
    for (size_t s = 0; s < table.tracked_ids.size(); ++s) {
      counts[{table.assignment[c][s], table.assignment[c + 1][s],
              static_cast<bool>(table.tracked_label[s]),
              table.tracked_stratum[s]}]++;
    }
    for (const auto& [key, count] : counts) {
      FlowEdge edge;
      edge.from_cell = c;
      edge.from_index = std::get<0>(key);
      edge.to_index = std::get<1>(key);
      edge.label = std::get<2>(key);
      edge.stratum = std::get<3>(key);
      edge.count = count;
      table.edges.push_back(std::move(edge));
    }
  }
  return table;
}

SplitReport detect_splits(const FlowTable& flows) {
  SplitReport report;
  for (size_t c = 0; c < flows.cells.size(); ++c) {
    const auto& cell = flows.cells[c];
    report.dominant_by_stratum.push_back(cell.stratum_phi);

    std::set<int> distinct;
    for (const auto& [stratum, phi] : cell.stratum_phi) distinct.insert(phi);
    if (distinct.size() < 2) continue;

    // report each divergent stratum pair at this cell
    for (auto a = cell.stratum_phi.begin(); a != cell.stratum_phi.end(); ++a) {
      for (auto b = std::next(a); b != cell.stratum_phi.end(); ++b) {
        if (a->second == b->second) continue;
        SplitEvent event;
        event.cell = c;
        event.latent_dim = cell.latent_dim;
        event.stratum_a = a->first;
        event.stratum_b = b->first;
        event.index_a = a->second;
        event.index_b = b->second;

        // purity: positives routed to whichever of the two indices fires
        // stronger; an index is pure when its catch belongs to its stratum
        long a_total = 0, a_match = 0, b_total = 0, b_match = 0;
        const auto& act_a = flows.stratum_activation[c].at(a->first);
        const auto& act_b = flows.stratum_activation[c].at(b->first);
        for (size_t s = 0; s < flows.tracked_ids.size(); ++s) {
          if (!flows.tracked_label[s]) continue;
          const double va = act_a[s];
          const double vb = act_b[s];
          if (va <= 0.0 && vb <= 0.0) continue;
          if (va >= vb) {
            ++a_total;
            a_match += flows.tracked_stratum[s] == a->first ? 1 : 0;
          } else {
            ++b_total;
            b_match += flows.tracked_stratum[s] == b->first ? 1 : 0;
          }
        }
        event.purity_a =
            a_total == 0 ? 0.0
                         : static_cast<double>(a_match) / static_cast<double>(a_total);
        event.purity_b =
            b_total == 0 ? 0.0
                         : static_cast<double>(b_match) / static_cast<double>(b_total);
        report.events.push_back(std::move(event));
      }
    }
    if (!report.split_latent_dim) report.split_latent_dim = cell.latent_dim;
  }
  return report;
}

namespace {

std::string node_id(const FlowTable& flows, size_t cell, int index) {
  return "L" + std::to_string(flows.cells[cell].latent_dim) + ":" +
         (index < 0 ? "none" : std::to_string(index));
}

}  // namespace

nlohmann::json flow_table_to_json(const FlowTable& flows) {
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& cell : flows.cells) {
    cells.push_back({{"latent_dim", cell.latent_dim},
                     {"k", cell.k},
                     {"overall_phi", cell.overall_phi},
                     {"stratum_phi", cell.stratum_phi}});
  }

  // node list plus weighted edges, ready for Sankey plotting
  std::set<std::pair<size_t, int>> node_keys;
  for (const auto& edge : flows.edges) {
    node_keys.insert({edge.from_cell, edge.from_index});
    node_keys.insert({edge.from_cell + 1, edge.to_index});
  }
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& [cell, index] : node_keys) {
    nodes.push_back({{"id", node_id(flows, cell, index)},
                     {"cell", cell},
                     {"latent_dim", flows.cells[cell].latent_dim},
                     {"index", index}});
  }
  nlohmann::json edges = nlohmann::json::array();
  for (const auto& edge : flows.edges) {
    edges.push_back({{"source", node_id(flows, edge.from_cell, edge.from_index)},
                     {"target", node_id(flows, edge.from_cell + 1, edge.to_index)},
                     {"from_cell", edge.from_cell},
                     {"to_cell", edge.from_cell + 1},
                     {"from_index", edge.from_index},
                     {"to_index", edge.to_index},
                     {"label", edge.label},
                     {"stratum", edge.stratum},
                     {"count", edge.count}});
  }
  return nlohmann::json{{"cells", std::move(cells)},
                        {"tracked_samples", flows.tracked_count()},
                        {"nodes", std::move(nodes)},
                        {"edges", std::move(edges)}};
}

nlohmann::json split_report_to_json(const FlowTable& flows,
                                    const SplitReport& report) {
  nlohmann::json dominant = nlohmann::json::array();
  for (size_t c = 0; c < report.dominant_by_stratum.size(); ++c) {
    dominant.push_back({{"latent_dim", flows.cells[c].latent_dim},
                        {"stratum_phi", report.dominant_by_stratum[c]}});
  }
  nlohmann::json events = nlohmann::json::array();
  for (const auto& event : report.events) {
    events.push_back({{"latent_dim", event.latent_dim},
                      {"stratum_a", event.stratum_a},
                      {"stratum_b", event.stratum_b},
                      {"index_a", event.index_a},
                      {"index_b", event.index_b},
                      {"purity_a", event.purity_a},
                      {"purity_b", event.purity_b}});
  }
  nlohmann::json j{{"dominant_by_stratum", std::move(dominant)},
                   {"events", std::move(events)}};
  if (report.split_latent_dim) {
    j["split_latent_dim"] = *report.split_latent_dim;
  } else {
    j["split_latent_dim"] = nullptr;
  }
  return j;
}

}  // namespace latentlens
