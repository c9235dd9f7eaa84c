// Copyright 2026 The latentlens authors
// SPDX-License-Identifier: Apache-2.0

#include "latentlens/commands.h"

#include <algorithm>
#include <array>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <vector>

#include "latentlens/corpus.h"
#include "latentlens/error.h"
#include "latentlens/grid.h"
#include "latentlens/io_util.h"
#include "latentlens/probe.h"
#include "latentlens/sae.h"
#include "latentlens/splitting.h"
#include "latentlens/steering.h"
#include "latentlens/synth.h"

namespace latentlens {

namespace {

constexpr const char* kVersion = "0.1.0";

using nlohmann::json;

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

template <typename T>
T json_get(const json& j, const std::string& key, T fallback) {
  if (!j.is_object() || !j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config field '" + key + "' has the wrong type");
  }
}

json section(const json& config, const std::string& name) {
  if (!config.is_object() || !config.contains(name)) return json::object();
  if (!config.at(name).is_object()) {
    throw ConfigError("config section '" + name + "' must be an object");
  }
  return config.at(name);
}

void require_exists(const std::filesystem::path& path, const std::string& what) {
  if (!std::filesystem::exists(path)) {
    throw MissingArtifactError("missing " + what + ": expected " + path.string());
  }
}

void vlog(const RunOptions& options, const std::string& msg) {
  if (options.verbose) std::fprintf(stderr, "[latentlens] %s\n", msg.c_str());
}

// run_meta.json keeps one entry per executed stage so any step can be
// re-executed identically.
void write_run_meta(const RunOptions& options, const std::string& command,
                    const json& effective, double wall_clock_s) {
  const auto path = options.out / "run_meta.json";
  json meta = json::object();
  if (std::filesystem::exists(path)) {
    try {
      meta = json::parse(read_file(path));
      if (!meta.is_object()) meta = json::object();
    } catch (const std::exception&) {
      meta = json::object();
    }
  }
  const std::string dump = effective.dump();
  char hash[32];
  std::snprintf(hash, sizeof(hash), "%016llx",
                static_cast<unsigned long long>(fnv1a64(dump)));
  meta[command] = {{"config", effective},
                   {"config_hash", hash},
                   {"seed", options.seed()},
                   {"version", kVersion},
                   {"wall_clock_s", wall_clock_s}};
  atomic_write_file(path, meta.dump(2) + "\n");
}

int guarded(const std::string& command, const std::function<int()>& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "latentlens %s: config error: %s\n", command.c_str(), e.what());
    return ExitCode::kConfig;
  } catch (const SpecError& e) {
    std::fprintf(stderr, "latentlens %s: spec error: %s\n", command.c_str(), e.what());
    return ExitCode::kConfig;
  } catch (const MissingArtifactError& e) {
    std::fprintf(stderr, "latentlens %s: %s\n", command.c_str(), e.what());
    return ExitCode::kMissing;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "latentlens %s: error: %s\n", command.c_str(), e.what());
    return ExitCode::kError;
  }
}

std::filesystem::path resolve(const RunOptions& options,
                              const std::optional<std::filesystem::path>& flag,
                              const json& paths, const std::string& key,
                              const std::string& fallback_name) {
  if (flag) return *flag;
  if (paths.contains(key)) return paths.at(key).get<std::string>();
  return options.out / fallback_name;
}

SaeConfig sae_config_from(const json& sae, int input_dim, uint64_t seed) {
  SaeConfig config;
  config.input_dim = input_dim;
  config.latent_dim = json_get<int>(sae, "latent_dim", 128);
  const std::string act = json_get<std::string>(sae, "activation", "topk");
  if (act == "topk") {
    config.activation = ActivationKind::kTopK;
  } else if (act == "relu") {
    config.activation = ActivationKind::kRelu;
  } else {
    throw ConfigError("sae.activation must be 'topk' or 'relu'");
  }
  config.topk = json_get<int>(sae, "topk", 10);
  config.l1_lambda = json_get<double>(sae, "l1_lambda", 0.0);
  config.learning_rate = json_get<double>(sae, "learning_rate", 1e-3);
  config.batch_size = json_get<int>(sae, "batch_size", 64);
  config.epochs = json_get<int>(sae, "epochs", 20);
  config.center_inputs = json_get<bool>(sae, "center_inputs", true);
  config.seed = seed;
  try {
    config.validate();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("sae config: ") + e.what());
  }
  return config;
}

json sae_config_to_json(const SaeConfig& config) {
  return json{{"input_dim", config.input_dim},
              {"latent_dim", config.latent_dim},
              {"activation", config.activation == ActivationKind::kTopK ? "topk" : "relu"},
              {"topk", config.topk},
              {"l1_lambda", config.l1_lambda},
              {"learning_rate", config.learning_rate},
              {"batch_size", config.batch_size},
              {"epochs", config.epochs},
              {"seed", config.seed},
              {"center_inputs", config.center_inputs}};
}

ProbeConfig probe_config_from(const json& probe, uint64_t seed) {
  ProbeConfig config;
  config.l2_lambda = json_get<double>(probe, "l2_lambda", 1e-3);
  config.max_iters = json_get<int>(probe, "max_iters", 2000);
  config.tolerance = json_get<double>(probe, "tolerance", 1e-7);
  config.seed = seed;
  try {
    config.validate();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("probe config: ") + e.what());
  }
  return config;
}

// Artifacts reference sibling files relative to the output root, so a run
// directory can be moved or compared bitwise across runs.
std::string portable_path(const std::filesystem::path& path,
                          const std::filesystem::path& base) {
  std::error_code ec;
  const auto rel = std::filesystem::relative(path, base, ec);
  if (ec || rel.empty() || rel.native().starts_with("..")) {
    return path.string();
  }
  return rel.string();
}

std::string require_attr(const RunOptions& options) {
  if (!options.attr.empty()) return options.attr;
  const std::string attr = json_get<std::string>(options.config, "attr", "");
  if (attr.empty()) {
    throw ConfigError("an attribute name is required (--attr or config 'attr')");
  }
  return attr;
}

EmbeddingCorpus load_corpus(const RunOptions& options) {
  const auto path = resolve(options, options.corpus_path,
                            section(options.config, "paths"), "corpus",
                            "corpus.embc");
  require_exists(path, "corpus");
  return read_corpus_file(path);
}

LabelSet load_labels(const RunOptions& options, const EmbeddingCorpus& corpus,
                     const std::string& attr) {
  const auto path = resolve(options, options.labels_path,
                            section(options.config, "paths"), "labels",
                            "labels_" + attr + ".csv");
  require_exists(path, "label file for '" + attr + "'");
  return read_labels_file(path, corpus, attr);
}


}  // namespace

uint64_t RunOptions::seed() const {
  if (seed_override) return *seed_override;
  return json_get<uint64_t>(config, "seed", 42);
}

int RunOptions::workers() const {
  if (workers_override) return *workers_override;
  return json_get<int>(config, "workers", 1);
}

json load_config_file(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw ConfigError("config file not found: " + path.string());
  }
  try {
    return json::parse(read_file(path));
  } catch (const std::exception& e) {
    throw ConfigError("cannot parse config " + path.string() + ": " + e.what());
  }
}

std::filesystem::path default_out_root() {
  if (const char* env = std::getenv("LATENT_LENS_OUT"); env && *env) {
    return env;
  }
  return std::filesystem::current_path();
}

int cmd_synth(const RunOptions& options) {
  return guarded("synth", [&] {
    Stopwatch timer;
    json spec_json;
    if (options.spec_path) {
      require_exists(*options.spec_path, "synth spec");
      try {
        spec_json = json::parse(read_file(*options.spec_path));
      } catch (const std::exception& e) {
        throw SpecError(std::string("cannot parse synth spec: ") + e.what());
      }
    } else {
      spec_json = section(options.config, "synth");
      if (spec_json.empty()) {
        throw ConfigError("synth needs --spec or a 'synth' config section");
      }
    }
    SynthSpec spec = synth_spec_from_json(spec_json);
    if (options.seed_override) spec.seed = *options.seed_override;

    vlog(options, "generating " + std::to_string(spec.n_samples) + " samples, dim " +
                      std::to_string(spec.dim));
    const SynthResult result = generate(spec);

    write_corpus_file(result.corpus, options.out / "corpus.embc");
    for (const auto& labels : result.labels) {
      std::ostringstream csv;
      write_labels(labels, csv);
      atomic_write_file(options.out / ("labels_" + labels.positive_label + ".csv"),
                        csv.str());
    }
    atomic_write_file(options.out / "ground_truth.json",
                      ground_truth_to_json(result).dump(2) + "\n");
    write_run_meta(options, "synth", synth_spec_to_json(result.spec), timer.seconds());
    return ExitCode::kOk;
  });
}

int cmd_train(const RunOptions& options) {
  return guarded("train", [&] {
    Stopwatch timer;
    const EmbeddingCorpus corpus = load_corpus(options);
    const json sae = section(options.config, "sae");
    const SaeConfig config = sae_config_from(sae, corpus.dim, options.seed());
    const double val_fraction = json_get<double>(sae, "val_fraction", 0.1);

    const CorpusSplit split = make_split(corpus.count(), val_fraction, config.seed);
    const EmbeddingCorpus train_sub = subset_corpus(corpus, split.train_indices);
    const EmbeddingCorpus val_sub = subset_corpus(corpus, split.test_indices);

    vlog(options, "training L=" + std::to_string(config.latent_dim));
    auto [model, stats] = train(config, train_sub, val_sub);
    save_model_file(model, options.out / "model.saec");
    atomic_write_file(options.out / "stats.json", train_stats_to_json_text(stats));

    json effective{{"sae", sae_config_to_json(config)},
                   {"val_fraction", val_fraction}};
    write_run_meta(options, "train", effective, timer.seconds());
    return ExitCode::kOk;
  });
}

int cmd_grid(const RunOptions& options) {
  return guarded("grid", [&] {
    Stopwatch timer;
    const EmbeddingCorpus corpus = load_corpus(options);
    const json grid = section(options.config, "grid");
    const json sae = section(options.config, "sae");

    GridSpec spec;
    spec.latent_dims = json_get<std::vector<int>>(
        grid, "latent_dims", {100, 200, 300, 400, 600, 800, 1200});
    spec.k_values =
        json_get<std::vector<int>>(grid, "k_values", {5, 10, 15, 20, 25, 30, 35});
    spec.base = sae_config_from(sae, corpus.dim, options.seed());
    spec.base.latent_dim = *std::max_element(spec.latent_dims.begin(),
                                             spec.latent_dims.end());
    spec.base.activation = ActivationKind::kTopK;
    spec.base.topk = 1;
    spec.output_dir = options.out / "grid";
    spec.parallel_workers = options.workers();
    try {
      spec.validate();
    } catch (const std::exception& e) {
      throw ConfigError(std::string("grid config: ") + e.what());
    }

    const double val_fraction = json_get<double>(sae, "val_fraction", 0.1);
    const CorpusSplit split = make_split(corpus.count(), val_fraction, options.seed());
    const EmbeddingCorpus train_sub = subset_corpus(corpus, split.train_indices);
    const EmbeddingCorpus val_sub = subset_corpus(corpus, split.test_indices);

    vlog(options, "grid over " + std::to_string(spec.latent_dims.size()) + " x " +
                      std::to_string(spec.k_values.size()) + " cells");
    const GridResult result = run_grid(spec, train_sub, val_sub);

    int failed = 0;
    for (const auto& cell : result.cells) {
      if (cell.status == CellStatus::kFailed) ++failed;
    }
    json effective{{"latent_dims", spec.latent_dims},
                   {"k_values", spec.k_values},
                   {"sae", sae_config_to_json(spec.base)},
                   {"val_fraction", val_fraction},
                   {"workers", spec.parallel_workers}};
    write_run_meta(options, "grid", effective, timer.seconds());
    if (failed > 0) {
      std::fprintf(stderr, "latentlens grid: %d cell(s) failed, see manifest\n", failed);
    }
    return ExitCode::kOk;
  });
}

namespace {

CorpusSplit eval_split(const RunOptions& options, const json& probe,
                       Eigen::Index count) {
  const double test_fraction = json_get<double>(probe, "test_fraction", 0.2);
  return make_split(count, test_fraction, options.seed());
}

json index_eval_to_json(const IndexEval& eval) {
  return json{{"precision", eval.precision},
              {"recall", eval.recall},
              {"zero_positive_predictions", eval.zero_positive_predictions},
              {"tp", eval.confusion.tp},
              {"fp", eval.confusion.fp},
              {"tn", eval.confusion.tn},
              {"fn", eval.confusion.fn}};
}

void write_misclassified_csv(const std::filesystem::path& path,
                             const IndexEval& eval) {
  std::string csv = "sample_id,type\n";
  for (const auto& id : eval.false_positive_ids) {
    csv += id + ",false_positive\n";
  }
  for (const auto& id : eval.false_negative_ids) {
    csv += id + ",false_negative\n";
  }
  atomic_write_file(path, csv);
}

// Rebuilds grid/summary.csv with probe metric columns joined from every
// probe_grid_<attr>.csv present next to the manifest.
void join_probe_columns(const GridResult& grid) {
  struct ProbeCols {
    std::string attr;
    std::map<std::pair<int, int>, std::array<std::string, 3>> rows;
  };
  std::vector<ProbeCols> tables;
  for (const auto& entry :
       std::filesystem::directory_iterator(grid.output_dir)) {
    const std::string name = entry.path().filename().string();
    if (name.rfind("probe_grid_", 0) != 0 || entry.path().extension() != ".csv") {
      continue;
    }
    ProbeCols cols;
    cols.attr = name.substr(11, name.size() - 11 - 4);
    std::istringstream in(read_file(entry.path()));
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
      std::istringstream row(line);
      std::string l, k, phi, precision, recall, ok;
      std::getline(row, l, ',');
      std::getline(row, k, ',');
      std::getline(row, ok, ',');
      std::getline(row, phi, ',');
      std::getline(row, precision, ',');
      std::getline(row, recall, ',');
      cols.rows[{std::stoi(l), std::stoi(k)}] = {phi, precision, recall};
    }
    tables.push_back(std::move(cols));
  }
  std::sort(tables.begin(), tables.end(),
            [](const ProbeCols& a, const ProbeCols& b) { return a.attr < b.attr; });

  std::istringstream base(summarize(grid));
  std::string line;
  std::getline(base, line);
  std::string out = line;
  for (const auto& t : tables) {
    out += ",probe_" + t.attr + "_phi,probe_" + t.attr + "_precision,probe_" +
           t.attr + "_recall";
  }
  out += "\n";
  size_t cell_index = 0;
  while (std::getline(base, line)) {
    const auto& cell = grid.cells[cell_index++];
    out += line;
    for (const auto& t : tables) {
      auto it = t.rows.find({cell.latent_dim, cell.k});
      if (it == t.rows.end()) {
        out += ",absent,absent,absent";
      } else {
        out += "," + it->second[0] + "," + it->second[1] + "," + it->second[2];
      }
    }
    out += "\n";
  }
  atomic_write_file(grid.output_dir / "summary.csv", out);
}

}  // namespace

int cmd_probe(const RunOptions& options) {
  return guarded("probe", [&] {
    Stopwatch timer;
    const std::string attr = require_attr(options);
    const EmbeddingCorpus corpus = load_corpus(options);
    const LabelSet labels = load_labels(options, corpus, attr);
    const json probe_section_json = section(options.config, "probe");
    const ProbeConfig config = probe_config_from(probe_section_json, options.seed());
    const CorpusSplit split = eval_split(options, probe_section_json, corpus.count());
    const double test_fraction =
        json_get<double>(probe_section_json, "test_fraction", 0.2);

    if (options.grid_dir) {
      require_exists(*options.grid_dir / "manifest.json", "grid manifest");
      const GridResult grid = read_manifest(*options.grid_dir);
      vlog(options, "probing " + std::to_string(grid.cells.size()) + " grid cells");
      const auto rows = probe_grid(grid, corpus, labels, split, config);
      std::string csv = "latent_dim,k,ok,phi,precision,recall,error\n";
      for (const auto& row : rows) {
        csv += std::to_string(row.latent_dim) + "," + std::to_string(row.k) + "," +
               (row.ok ? "1" : "0") + "," + std::to_string(row.phi) + "," +
               std::to_string(row.precision) + "," + std::to_string(row.recall) +
               "," + (row.error.empty() ? "" : "\"" + row.error + "\"") + "\n";
      }
      atomic_write_file(*options.grid_dir / ("probe_grid_" + attr + ".csv"), csv);
      join_probe_columns(grid);
      json effective{{"attr", attr},
                     {"mode", "grid"},
                     {"test_fraction", test_fraction},
                     {"l2_lambda", config.l2_lambda},
                     {"max_iters", config.max_iters},
                     {"tolerance", config.tolerance}};
      write_run_meta(options, "probe", effective, timer.seconds());
      return ExitCode::kOk;
    }

    const auto model_path = resolve(options, options.model_path,
                                    section(options.config, "paths"), "model",
                                    "model.saec");
    require_exists(model_path, "SAE checkpoint");
    const SaeModel model = load_model_file(model_path);
    const ProbeResult result = fit_probe(model, corpus, labels, split, config);

    json out{{"attr", attr},
             {"phi", result.phi},
             {"intercept", result.intercept},
             {"train_accuracy", result.train_accuracy},
             {"train_loss", result.train_loss},
             {"iterations", result.iterations},
             {"weights", std::vector<double>(result.weights.data(),
                                             result.weights.data() + result.weights.size())},
             {"test", index_eval_to_json(result.test)},
             {"split", {{"test_fraction", test_fraction}, {"seed", options.seed()}}},
             {"model", portable_path(model_path, options.out)}};
    atomic_write_file(options.out / ("probe_" + attr + ".json"), out.dump(2) + "\n");
    write_misclassified_csv(options.out / ("misclassified_" + attr + ".csv"),
                            result.test);

    json effective{{"attr", attr},
                   {"mode", "model"},
                   {"model", portable_path(model_path, options.out)},
                   {"test_fraction", test_fraction},
                   {"l2_lambda", config.l2_lambda},
                   {"max_iters", config.max_iters},
                   {"tolerance", config.tolerance}};
    write_run_meta(options, "probe", effective, timer.seconds());
    return ExitCode::kOk;
  });
}

namespace {

std::string hist_csv_rows(const std::string& cls, const std::string& phase,
                          const Histogram& hist) {
  std::string rows;
  const double width = (hist.hi - hist.lo) / static_cast<double>(hist.counts.size());
  rows += cls + "," + phase + ",-1,-inf," + std::to_string(hist.lo) + "," +
          std::to_string(hist.underflow) + "\n";
  for (size_t b = 0; b < hist.counts.size(); ++b) {
    const double lo = hist.lo + width * static_cast<double>(b);
    rows += cls + "," + phase + "," + std::to_string(b) + "," + std::to_string(lo) +
            "," + std::to_string(lo + width) + "," + std::to_string(hist.counts[b]) +
            "\n";
  }
  rows += cls + "," + phase + "," + std::to_string(hist.counts.size()) + "," +
          std::to_string(hist.hi) + ",inf," + std::to_string(hist.overflow) + "\n";
  return rows;
}

json histogram_to_json(const Histogram& hist) {
  return json{{"lo", hist.lo},
              {"hi", hist.hi},
              {"counts", hist.counts},
              {"underflow", hist.underflow},
              {"overflow", hist.overflow}};
}

}  // namespace

int cmd_steer(const RunOptions& options) {
  return guarded("steer", [&] {
    Stopwatch timer;
    const std::string attr = require_attr(options);
    const EmbeddingCorpus corpus = load_corpus(options);
    const LabelSet labels = load_labels(options, corpus, attr);

    const auto probe_path = options.probe_path
                                ? *options.probe_path
                                : options.out / ("probe_" + attr + ".json");
    require_exists(probe_path, "probe result (run `latentlens probe` first)");
    json probe_json;
    try {
      probe_json = json::parse(read_file(probe_path));
    } catch (const std::exception& e) {
      throw FormatError("cannot parse " + probe_path.string() + ": " + e.what());
    }

    std::filesystem::path model_path;
    if (options.model_path) {
      model_path = *options.model_path;
    } else {
      model_path = json_get<std::string>(probe_json, "model", "model.saec");
      if (model_path.is_relative()) model_path = options.out / model_path;
    }
    require_exists(model_path, "SAE checkpoint");
    const SaeModel model = load_model_file(model_path);

    const json steer_section = section(options.config, "steer");
    SteerConfig config;
    config.phi = json_get<int>(probe_json, "phi", -1);
    config.a_phi = json_get<double>(steer_section, "a_phi", 1.0);
    config.positive_class = attr;
    config.negative_class = "not_" + attr;
    try {
      config.validate(model.config.latent_dim);
    } catch (const std::exception& e) {
      throw ConfigError(std::string("steer config: ") + e.what());
    }

    // reuse the probe's partition so centroids come from training rows only
    const json split_json = json_get<json>(probe_json, "split", json::object());
    const double test_fraction = json_get<double>(split_json, "test_fraction", 0.2);
    const uint64_t split_seed = json_get<uint64_t>(split_json, "seed", options.seed());
    const CorpusSplit split = make_split(corpus.count(), test_fraction, split_seed);

    vlog(options, "steering phi=" + std::to_string(config.phi));
    const SteeringContext ctx = build_context(model, corpus, labels, split.train_indices);
    const SteeringReport report =
        run_steering(model, ctx, corpus, labels, split.test_indices, config);

    long n_pos = 0, n_neg = 0;
    for (const auto& sample : report.samples) (sample.positive ? n_pos : n_neg)++;
    json out{{"attr", attr},
             {"phi", config.phi},
             {"a_phi", config.a_phi},
             {"n_positive", n_pos},
             {"n_negative", n_neg},
             {"means",
              {{"positive_before", report.mean_pos_before},
               {"positive_after", report.mean_pos_after},
               {"negative_before", report.mean_neg_before},
               {"negative_after", report.mean_neg_after}}},
             {"histograms",
              {{"positive_before", histogram_to_json(report.hist_pos_before)},
               {"positive_after", histogram_to_json(report.hist_pos_after)},
               {"negative_before", histogram_to_json(report.hist_neg_before)},
               {"negative_after", histogram_to_json(report.hist_neg_after)}}}};
    atomic_write_file(options.out / ("steering_" + attr + ".json"),
                      out.dump(2) + "\n");

    std::string csv = "class,phase,bin_index,bin_lo,bin_hi,count\n";
    csv += hist_csv_rows("positive", "before", report.hist_pos_before);
    csv += hist_csv_rows("positive", "after", report.hist_pos_after);
    csv += hist_csv_rows("negative", "before", report.hist_neg_before);
    csv += hist_csv_rows("negative", "after", report.hist_neg_after);
    atomic_write_file(options.out / ("steering_" + attr + "_hist.csv"), csv);

    json effective{{"attr", attr},
                   {"phi", config.phi},
                   {"a_phi", config.a_phi},
                   {"model", portable_path(model_path, options.out)},
                   {"test_fraction", test_fraction},
                   {"split_seed", split_seed}};
    write_run_meta(options, "steer", effective, timer.seconds());
    return ExitCode::kOk;
  });
}

int cmd_split(const RunOptions& options) {
  return guarded("split", [&] {
    Stopwatch timer;
    const std::string attr = require_attr(options);
    const EmbeddingCorpus corpus = load_corpus(options);
    const LabelSet labels = load_labels(options, corpus, attr);
    const auto grid_dir = options.grid_dir ? *options.grid_dir : options.out / "grid";
    require_exists(grid_dir / "manifest.json", "grid manifest (run `latentlens grid` first)");
    const GridResult grid = read_manifest(grid_dir);

    const json probe_section_json = section(options.config, "probe");
    const ProbeConfig config = probe_config_from(probe_section_json, options.seed());
    const CorpusSplit split = eval_split(options, probe_section_json, corpus.count());

    // group trained cells by k
    std::map<int, std::vector<const GridCell*>> by_k;
    for (const auto& cell : grid.cells) {
      if (cell.status != CellStatus::kCompleted && cell.status != CellStatus::kResumed) {
        continue;
      }
      if (options.k_filter && cell.k != *options.k_filter) continue;
      by_k[cell.k].push_back(&cell);
    }

    json flows_json = json::array();
    json report_json = json::array();
    json plateau = json::array();
    int analyzed = 0;
    for (auto& [k, cells] : by_k) {
      if (cells.size() < 2) continue;
      std::sort(cells.begin(), cells.end(), [](const GridCell* a, const GridCell* b) {
        return a->latent_dim < b->latent_dim;
      });
      std::vector<SaeModel> models;
      models.reserve(cells.size());
      for (const auto* cell : cells) {
        models.push_back(load_model_file(cell->checkpoint_path));
      }
      vlog(options, "tracking flows for k=" + std::to_string(k) + " over " +
                        std::to_string(models.size()) + " models");
      const FlowTable flows = build_flows(models, corpus, labels, split, config);
      const SplitReport split_report = detect_splits(flows);

      json fj = flow_table_to_json(flows);
      fj["k"] = k;
      fj["attr"] = attr;
      flows_json.push_back(std::move(fj));

      json rj = split_report_to_json(flows, split_report);
      rj["k"] = k;
      rj["attr"] = attr;
      report_json.push_back(std::move(rj));

      plateau.push_back(
          {{"k", k},
           {"split_latent_dim", split_report.split_latent_dim
                                    ? json(*split_report.split_latent_dim)
                                    : json(nullptr)}});
      ++analyzed;
    }
    if (analyzed == 0) {
      throw UsageError("split: no k with at least 2 trained latent dimensions");
    }

    atomic_write_file(options.out / "flows.json",
                      json{{"attr", attr}, {"per_k", flows_json}}.dump(2) + "\n");
    atomic_write_file(
        options.out / "split_report.json",
        json{{"attr", attr}, {"per_k", report_json}, {"split_latent_dim_by_k", plateau}}
                .dump(2) +
            "\n");

    json effective{{"attr", attr},
                   {"grid", grid_dir.string()},
                   {"l2_lambda", config.l2_lambda},
                   {"test_fraction",
                    json_get<double>(probe_section_json, "test_fraction", 0.2)}};
    write_run_meta(options, "split", effective, timer.seconds());
    return ExitCode::kOk;
  });
}

int cmd_export(const RunOptions& options) {
  return guarded("export", [&] {
    Stopwatch timer;
    json report = json::object();
    std::vector<std::string> gaps;

    // grid section from summary.csv
    const auto summary_path = options.out / "grid" / "summary.csv";
    if (std::filesystem::exists(summary_path)) {
      json rows = json::array();
      std::istringstream in(read_file(summary_path));
      std::string header, line;
      std::getline(in, header);
      std::vector<std::string> cols;
      {
        std::istringstream hs(header);
        std::string col;
        while (std::getline(hs, col, ',')) cols.push_back(col);
      }
      while (std::getline(in, line)) {
        std::istringstream ls(line);
        std::string field;
        json row = json::object();
        for (size_t c = 0; c < cols.size() && std::getline(ls, field, ','); ++c) {
          row[cols[c]] = field;
        }
        rows.push_back(std::move(row));
      }
      report["grid"] = std::move(rows);
      atomic_write_file(options.out / "heatmap.csv", read_file(summary_path));
    } else {
      gaps.push_back("grid");
    }

    // probe + steering sections from per-attribute artifacts
    json probes = json::object();
    json steering = json::object();
    for (const auto& entry : std::filesystem::directory_iterator(options.out)) {
      const std::string name = entry.path().filename().string();
      if (entry.path().extension() != ".json") continue;
      try {
        if (name.rfind("probe_", 0) == 0) {
          probes[name.substr(6, name.size() - 6 - 5)] = json::parse(read_file(entry.path()));
        } else if (name.rfind("steering_", 0) == 0) {
          steering[name.substr(9, name.size() - 9 - 5)] =
              json::parse(read_file(entry.path()));
        }
      } catch (const std::exception&) {
        // unreadable artifact counts as absent
      }
    }
    if (probes.empty()) {
      gaps.push_back("probe");
    } else {
      report["probe"] = probes;
    }
    if (steering.empty()) {
      gaps.push_back("steering");
    } else {
      report["steering"] = steering;
      std::string means = "attr,class,mean_before,mean_after\n";
      for (const auto& [attr, sj] : steering.items()) {
        const json m = sj.value("means", json::object());
        means += attr + ",positive," +
                 std::to_string(m.value("positive_before", 0.0)) + "," +
                 std::to_string(m.value("positive_after", 0.0)) + "\n";
        means += attr + ",negative," +
                 std::to_string(m.value("negative_before", 0.0)) + "," +
                 std::to_string(m.value("negative_after", 0.0)) + "\n";
      }
      atomic_write_file(options.out / "steering_means.csv", means);
    }

    // splitting section
    json splitting = json::object();
    bool have_split = false;
    for (const char* name : {"flows.json", "split_report.json"}) {
      const auto path = options.out / name;
      if (!std::filesystem::exists(path)) continue;
      try {
        splitting[std::filesystem::path(name).stem().string()] =
            json::parse(read_file(path));
        have_split = true;
      } catch (const std::exception&) {
      }
    }
    if (have_split) {
      report["splitting"] = std::move(splitting);
    } else {
      gaps.push_back("splitting");
    }

    // meta section
    const auto meta_path = options.out / "run_meta.json";
    if (std::filesystem::exists(meta_path)) {
      try {
        report["meta"] = json::parse(read_file(meta_path));
      } catch (const std::exception&) {
        gaps.push_back("meta");
      }
    } else {
      gaps.push_back("meta");
    }

    report["gaps"] = gaps;
    atomic_write_file(options.out / "report.json", report.dump(2) + "\n");
    write_run_meta(options, "export", json{{"gaps", gaps}}, timer.seconds());
    return ExitCode::kOk;
  });
}

}  // namespace latentlens
