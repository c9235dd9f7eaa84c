// Copyright 2026 The latentlens authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "latentlens/corpus.h"
#include "latentlens/grid.h"
#include "latentlens/sae.h"

namespace latentlens {

struct ProbeConfig {
  double l2_lambda = 1e-3;
  int max_iters = 2000;
  double tolerance = 1e-7;  // on the gradient infinity norm
  uint64_t seed = 0;

  void validate() const;
};

// Plain L2-regularized logistic regression (intercept unregularized).
struct LogisticModel {
  Eigen::VectorXd weights;
  double intercept = 0.0;
  double final_loss = 0.0;
  double final_grad_norm = 0.0;
  int iterations = 0;
};

// Mean cross-entropy + 0.5 * l2_lambda * |w|^2 and its gradient, evaluated
// at (w, b). Exposed so the gradient can be checked against finite
// differences and so raw-embedding separability can be verified with the
// same solver the probe uses.
double logistic_loss(const Eigen::MatrixXd& features,
                     const Eigen::VectorXd& targets, const Eigen::VectorXd& w,
                     double b, double l2_lambda,
                     Eigen::VectorXd* grad_w = nullptr,
                     double* grad_b = nullptr);

// Deterministic full-batch gradient descent with backtracking line search.
// Throws ConvergenceError (carrying the last gradient norm) when the
// tolerance is not met within max_iters.
LogisticModel fit_logistic(const Eigen::MatrixXd& features,
                           const Eigen::VectorXd& targets,
                           const ProbeConfig& config);

struct ConfusionCounts {
  long tp = 0, fp = 0, tn = 0, fn = 0;
};

struct IndexEval {
  double precision = 0.0;
  double recall = 0.0;
  bool zero_positive_predictions = false;  // precision reported as 0, not 0/0
  ConfusionCounts confusion;
  std::vector<std::string> false_positive_ids;
  std::vector<std::string> false_negative_ids;
};

struct ProbeResult {
  Eigen::VectorXd weights;  // length L
  double intercept = 0.0;
  int phi = -1;  // latent index with the largest positive-class weight
  double train_accuracy = 0.0;
  double train_loss = 0.0;
  int iterations = 0;
  IndexEval test;  // phi evaluated as a standalone discriminant
};

// Encodes train-split samples to latents, fits the regression, selects
// phi = argmax weight, and evaluates activation(phi) > 0 as a test-split
// discriminant.
ProbeResult fit_probe(const SaeModel& model, const EmbeddingCorpus& corpus,
                      const LabelSet& labels, const CorpusSplit& split,
                      const ProbeConfig& config);

// Predicts positive iff encode(e)[phi] > 0 over `index_set` rows;
// misclassified sample ids are returned for qualitative review.
IndexEval evaluate_index(const SaeModel& model, int phi,
                         const EmbeddingCorpus& corpus, const LabelSet& labels,
                         const std::vector<Eigen::Index>& index_set);

struct ProbeGridRow {
  int latent_dim = 0;
  int k = 0;
  bool ok = false;
  std::string error;
  int phi = -1;
  double precision = 0.0;
  double recall = 0.0;
};

// Runs fit_probe on every completed grid cell; per-cell failures are
// recorded and the sweep continues. Rows come back ordered by (L, k),
// ready for the heatmap table.
std::vector<ProbeGridRow> probe_grid(const GridResult& grid,
                                     const EmbeddingCorpus& corpus,
                                     const LabelSet& labels,
                                     const CorpusSplit& split,
                                     const ProbeConfig& config);

// Probe metric helpers shared with the splitting analysis.
Eigen::MatrixXd encode_rows(const SaeModel& model, const EmbeddingCorpus& corpus,
                            const std::vector<Eigen::Index>& rows);  // n x L

}  // namespace latentlens
