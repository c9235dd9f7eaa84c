// Copyright 2026 The latentlens authors
// SPDX-License-Identifier: Apache-2.0

#include "latentlens/probe.h"

#include <doctest.h>

#include <cmath>
#include <random>

#include "latentlens/error.h"
#include "latentlens/synth.h"
#include "test_util.h"

using namespace latentlens;
using latentlens::testing::random_corpus;
using latentlens::testing::random_model;

namespace {

// Corpus whose column `indicator` is 1 for positives and 0 for negatives,
// with small nonnegative noise elsewhere; a ReLU passthrough SAE exposes the
// columns as latents.
struct OracleSetup {
  EmbeddingCorpus corpus;
  LabelSet labels;
  SaeModel model;
  CorpusSplit split;
};

OracleSetup indicator_setup(int m, int indicator, Eigen::Index n, uint64_t seed) {
  OracleSetup setup;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> noise(0.0f, 0.1f);
  setup.corpus.dim = m;
  setup.corpus.data.resize(n, m);
  setup.corpus.sample_ids.emplace();
  setup.labels.positive_label = "attr";
  for (Eigen::Index i = 0; i < n; ++i) {
    const bool positive = (rng() % 2) == 0;
    for (int j = 0; j < m; ++j) setup.corpus.data(i, j) = noise(rng);
    setup.corpus.data(i, indicator) = positive ? 1.0f : 0.0f;
    const std::string id = "s" + std::to_string(i);
    setup.corpus.sample_ids->push_back(id);
    setup.labels.labels[id] = positive;
  }
  setup.model.config.input_dim = m;
  setup.model.config.latent_dim = m;
  setup.model.config.activation = ActivationKind::kRelu;
  setup.model.config.center_inputs = false;
  setup.model.enc_weight = Eigen::MatrixXd::Identity(m, m);
  setup.model.enc_bias = Eigen::VectorXd::Zero(m);
  setup.model.dec_weight = Eigen::MatrixXd::Identity(m, m);
  setup.model.dec_bias = Eigen::VectorXd::Zero(m);
  setup.model.input_mean = Eigen::VectorXd::Zero(m);
  setup.split = make_split(n, 0.3, seed + 1);
  return setup;
}

}  // namespace

TEST_CASE("logistic gradient matches central finite differences") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal(0.0, 1.0);
  const Eigen::Index n = 40;
  const int d = 5;
  Eigen::MatrixXd x(n, d);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) x(i, j) = normal(rng);
    y[i] = (rng() % 2) == 0 ? 1.0 : 0.0;
  }
  Eigen::VectorXd w(d);
  for (int j = 0; j < d; ++j) w[j] = 0.3 * normal(rng);
  double b = 0.1;
  const double lambda = 1e-2;

  Eigen::VectorXd grad_w(d);
  double grad_b = 0.0;
  logistic_loss(x, y, w, b, lambda, &grad_w, &grad_b);

  const double h = 1e-6;
  for (int j = 0; j < d; ++j) {
    Eigen::VectorXd wp = w, wm = w;
    wp[j] += h;
    wm[j] -= h;
    const double fd = (logistic_loss(x, y, wp, b, lambda) -
                       logistic_loss(x, y, wm, b, lambda)) /
                      (2 * h);
    CHECK(std::abs(fd - grad_w[j]) /
              std::max({std::abs(fd), std::abs(grad_w[j]), 1e-10}) <
          1e-4);
  }
  const double fd_b = (logistic_loss(x, y, w, b + h, lambda) -
                       logistic_loss(x, y, w, b - h, lambda)) /
                      (2 * h);
  CHECK(std::abs(fd_b - grad_b) /
            std::max({std::abs(fd_b), std::abs(grad_b), 1e-10}) <
        1e-4);
}

TEST_CASE("fit_logistic is deterministic and seed-insensitive at the optimum") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> normal(0.0, 1.0);
  const Eigen::Index n = 200;
  const int d = 6;
  Eigen::MatrixXd x(n, d);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) x(i, j) = normal(rng);
    y[i] = x(i, 1) + 0.3 * normal(rng) > 0 ? 1.0 : 0.0;
  }
  ProbeConfig config;
  config.l2_lambda = 1e-2;
  config.tolerance = 1e-9;
  config.max_iters = 5000;

  const LogisticModel a = fit_logistic(x, y, config);
  const LogisticModel b = fit_logistic(x, y, config);
  CHECK(a.weights == b.weights);
  CHECK(a.intercept == b.intercept);

  // strictly convex objective: a perturbed start reaches the same optimum
  ProbeConfig other = config;
  other.seed = 99;
  const LogisticModel c = fit_logistic(x, y, other);
  CHECK(std::abs(a.final_loss - c.final_loss) < 1e-7);
  CHECK((a.weights - c.weights).cwiseAbs().maxCoeff() < 1e-4);
}

TEST_CASE("fit_logistic throws ConvergenceError when starved of iterations") {
  std::mt19937_64 rng(13);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd x(50, 4);
  Eigen::VectorXd y(50);
  for (Eigen::Index i = 0; i < 50; ++i) {
    for (int j = 0; j < 4; ++j) x(i, j) = normal(rng);
    y[i] = (rng() % 2) == 0 ? 1.0 : 0.0;
  }
  ProbeConfig config;
  config.max_iters = 1;
  config.tolerance = 1e-14;
  try {
    fit_logistic(x, y, config);
    FAIL("expected ConvergenceError");
  } catch (const ConvergenceError& e) {
    CHECK(e.last_grad_norm > 0.0);
  }
}

TEST_CASE("probe recovers a perfect indicator latent") {
  const OracleSetup setup = indicator_setup(6, 3, 400, 17);
  ProbeConfig config;
  const ProbeResult result =
      fit_probe(setup.model, setup.corpus, setup.labels, setup.split, config);
  CHECK(result.phi == 3);
  CHECK(result.test.precision == 1.0);
  CHECK(result.test.recall == 1.0);
  CHECK(result.train_accuracy > 0.99);
  CHECK(result.test.false_positive_ids.empty());
  CHECK(result.test.false_negative_ids.empty());
}

TEST_CASE("fit_probe is deterministic") {
  const OracleSetup setup = indicator_setup(5, 2, 200, 23);
  ProbeConfig config;
  const ProbeResult a =
      fit_probe(setup.model, setup.corpus, setup.labels, setup.split, config);
  const ProbeResult b =
      fit_probe(setup.model, setup.corpus, setup.labels, setup.split, config);
  CHECK(a.phi == b.phi);
  CHECK(a.weights == b.weights);
}

TEST_CASE("constant labels on the train partition are rejected") {
  OracleSetup setup = indicator_setup(5, 2, 100, 29);
  for (Eigen::Index row : setup.split.train_indices) {
    setup.labels.labels["s" + std::to_string(row)] = true;
  }
  ProbeConfig config;
  CHECK_THROWS_AS(
      fit_probe(setup.model, setup.corpus, setup.labels, setup.split, config),
      UsageError);
}

TEST_CASE("all-zero activations give recall 0 and flagged precision 0") {
  OracleSetup setup = indicator_setup(4, 1, 120, 31);
  setup.model.enc_weight.setZero();
  setup.model.enc_bias.setConstant(-1.0);  // ReLU silences everything
  std::vector<Eigen::Index> all;
  for (Eigen::Index i = 0; i < setup.corpus.count(); ++i) all.push_back(i);
  const IndexEval eval =
      evaluate_index(setup.model, 1, setup.corpus, setup.labels, all);
  CHECK(eval.recall == 0.0);
  CHECK(eval.precision == 0.0);
  CHECK(eval.zero_positive_predictions);
  CHECK(eval.confusion.tp == 0);
  CHECK(eval.confusion.fp == 0);
}

TEST_CASE("evaluate_index rejects an empty index set") {
  const OracleSetup setup = indicator_setup(4, 1, 50, 37);
  CHECK_THROWS_AS(evaluate_index(setup.model, 1, setup.corpus, setup.labels, {}),
                  UsageError);
}

TEST_CASE("evaluate_index rejects phi out of range") {
  const OracleSetup setup = indicator_setup(4, 1, 50, 41);
  std::vector<Eigen::Index> all{0, 1, 2};
  CHECK_THROWS_AS(evaluate_index(setup.model, 7, setup.corpus, setup.labels, all),
                  ShapeError);
}

TEST_CASE("probe_grid yields one row with a phi per trained cell") {
  latentlens::testing::TempDir tmp("probe_grid");
  SynthSpec spec;
  spec.dim = 12;
  spec.n_samples = 500;
  spec.n_speakers = 10;
  spec.noise_sigma = 0.05;
  spec.seed = 3;
  PlantedAttribute attr;
  attr.name = "attr";
  attr.prevalence = 0.4;
  attr.strength = 2.0;
  spec.attributes.push_back(attr);
  const SynthResult synth = generate(spec);

  GridSpec grid;
  grid.latent_dims = {8, 16};
  grid.k_values = {4};
  grid.base.input_dim = 12;
  grid.base.epochs = 4;
  grid.base.batch_size = 32;
  grid.base.seed = 3;
  grid.output_dir = tmp.path();
  const CorpusSplit sae_split = make_split(500, 0.1, 3);
  const GridResult result =
      run_grid(grid, subset_corpus(synth.corpus, sae_split.train_indices),
               subset_corpus(synth.corpus, sae_split.test_indices));

  const CorpusSplit probe_split = make_split(500, 0.3, 3);
  ProbeConfig config;
  const auto rows =
      probe_grid(result, synth.corpus, synth.labels[0], probe_split, config);
  REQUIRE(rows.size() == 2);
  for (const auto& row : rows) {
    CHECK(row.ok);
    CHECK(row.phi >= 0);
    CHECK(row.phi < row.latent_dim);
    CHECK(row.recall > 0.0);
  }
  CHECK(rows[0].latent_dim == 8);
  CHECK(rows[1].latent_dim == 16);
}

TEST_CASE("probe_grid records per-cell failures and continues") {
  latentlens::testing::TempDir tmp("probe_grid_fail");
  GridResult grid;
  grid.output_dir = tmp.path();
  GridCell good;  // points at a missing checkpoint
  good.latent_dim = 8;
  good.k = 4;
  good.status = CellStatus::kCompleted;
  good.checkpoint_path = tmp.path() / "missing.saec";
  grid.cells.push_back(good);
  GridCell skipped;
  skipped.latent_dim = 4;
  skipped.k = 9;
  skipped.status = CellStatus::kSkippedInvalid;
  grid.cells.push_back(skipped);

  const EmbeddingCorpus corpus = random_corpus(20, 6, 5);
  LabelSet labels;
  labels.positive_label = "attr";
  for (Eigen::Index i = 0; i < 20; ++i) {
    labels.labels["s" + std::to_string(i)] = (i % 2) == 0;
  }
  const auto rows =
      probe_grid(grid, corpus, labels, make_split(20, 0.3, 1), ProbeConfig{});
  REQUIRE(rows.size() == 2);
  CHECK(!rows[0].ok);
  CHECK(!rows[0].error.empty());
  CHECK(!rows[1].ok);
}

TEST_CASE("evaluate_index matches brute-force confusion counts") {
  std::mt19937_64 seeds(43);
  for (int trial = 0; trial < 20; ++trial) {
    const int m = 4, l = 6;
    const SaeModel model = random_model(m, l, 2, seeds());
    const EmbeddingCorpus corpus = random_corpus(25, m, seeds());
    LabelSet labels;
    labels.positive_label = "attr";
    std::mt19937_64 rng(seeds());
    for (Eigen::Index i = 0; i < corpus.count(); ++i) {
      labels.labels[(*corpus.sample_ids)[static_cast<size_t>(i)]] = (rng() % 2) == 0;
    }
    const int phi = static_cast<int>(seeds() % l);
    std::vector<Eigen::Index> rows;
    for (Eigen::Index i = 0; i < corpus.count(); ++i) rows.push_back(i);

    long tp = 0, fp = 0, tn = 0, fn = 0;
    for (Eigen::Index i = 0; i < corpus.count(); ++i) {
      const LatentVector v =
          encode(model, corpus.data.row(i).transpose().cast<double>());
      const bool predicted = v[phi] > 0.0;
      const bool actual =
          labels.labels.at((*corpus.sample_ids)[static_cast<size_t>(i)]);
      tp += (predicted && actual) ? 1 : 0;
      fp += (predicted && !actual) ? 1 : 0;
      tn += (!predicted && !actual) ? 1 : 0;
      fn += (!predicted && actual) ? 1 : 0;
    }
    const IndexEval eval = evaluate_index(model, phi, corpus, labels, rows);
    CHECK(eval.confusion.tp == tp);
    CHECK(eval.confusion.fp == fp);
    CHECK(eval.confusion.tn == tn);
    CHECK(eval.confusion.fn == fn);
    CHECK(eval.false_positive_ids.size() == static_cast<size_t>(fp));
    CHECK(eval.false_negative_ids.size() == static_cast<size_t>(fn));
  }
}
