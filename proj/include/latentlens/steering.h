// Copyright 2026 The latentlens authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "latentlens/corpus.h"
#include "latentlens/sae.h"

namespace latentlens {

enum class SteerDirection { kActivate, kDeactivate };

struct SteerConfig {
  int phi = -1;
  double a_phi = 1.0;  // steering magnitude
  std::string positive_class;
  std::string negative_class;
  SteerDirection direction = SteerDirection::kDeactivate;

  void validate(int latent_dim) const;
};

// Class centroids of SAE-reconstructed training embeddings; the reference
// points of the relative similarity score.
struct SteeringContext {
  Eigen::VectorXd centroid_pos;
  Eigen::VectorXd centroid_neg;
  std::string source;  // provenance of the training rows
};

struct SteeringSample {
  std::string sample_id;
  bool positive = false;
  double delta_before = 0.0;
  double delta_after = 0.0;
};

struct Histogram {
  double lo = -1.2;
  double hi = 1.2;
  std::vector<long> counts = std::vector<long>(40, 0);  // uniform bins
  long underflow = 0;
  long overflow = 0;

  void add(double x);
};

struct SteeringReport {
  std::vector<SteeringSample> samples;
  double mean_pos_before = 0.0;
  double mean_pos_after = 0.0;
  double mean_neg_before = 0.0;
  double mean_neg_after = 0.0;
  Histogram hist_pos_before, hist_pos_after, hist_neg_before, hist_neg_after;
};

// Mean of decode(encode(e)) over each class within train_indices.
SteeringContext build_context(const SaeModel& model, const EmbeddingCorpus& corpus,
                              const LabelSet& labels,
                              const std::vector<Eigen::Index>& train_indices);

// Copy of v with element phi overwritten by +a_phi (activate) or -a_phi
// (deactivate); every other element untouched. The result is fed to the
// decoder as-is, so a TopK latent may end up with k+1 nonzeros.
LatentVector steer_latent(const LatentVector& v, const SteerConfig& config);

// cosine(x, centroid_pos) - cosine(x, centroid_neg); positive means closer
// to the positive-class reference.
double relative_similarity(const Eigen::VectorXd& x, const SteeringContext& ctx);

// Deactivates phi for positive-class test samples and activates it for
// negative-class ones, recording the relative similarity score of each
// sample's reconstruction before and after.
SteeringReport run_steering(const SaeModel& model, const SteeringContext& ctx,
                            const EmbeddingCorpus& corpus, const LabelSet& labels,
                            const std::vector<Eigen::Index>& test_indices,
                            const SteerConfig& config);

}  // namespace latentlens
