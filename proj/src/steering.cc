// Copyright 2026 The latentlens authors
// SPDX-License-Identifier: Apache-2.0

#include "latentlens/steering.h"

#include <algorithm>
#include <cmath>

#include "latentlens/error.h"

namespace latentlens {

void SteerConfig::validate(int latent_dim) const {
  if (phi < 0 || phi >= latent_dim) {
    throw ShapeError("steer: phi " + std::to_string(phi) +
                     " out of range for latent_dim " + std::to_string(latent_dim));
  }
  if (!(a_phi > 0.0)) throw ValidationError("steer: a_phi must be positive");
}

void Histogram::add(double x) {
  if (x < lo) {
    ++underflow;
    return;
  }
  if (x >= hi) {
    ++overflow;
    return;
  }
  const auto bin = static_cast<size_t>((x - lo) / (hi - lo) *
                                       static_cast<double>(counts.size()));
  ++counts[std::min(bin, counts.size() - 1)];
}

SteeringContext build_context(const SaeModel& model, const EmbeddingCorpus& corpus,
                              const LabelSet& labels,
                              const std::vector<Eigen::Index>& train_indices) {
  if (!corpus.sample_ids) {
    throw UsageError("build_context requires a corpus with sample ids");
  }
  Eigen::VectorXd sum_pos = Eigen::VectorXd::Zero(corpus.dim);
  Eigen::VectorXd sum_neg = Eigen::VectorXd::Zero(corpus.dim);
  long n_pos = 0, n_neg = 0;
  for (Eigen::Index row : train_indices) {
    if (row < 0 || row >= corpus.count()) {
      throw ValidationError("train index out of range: " + std::to_string(row));
    }
    const auto& id = (*corpus.sample_ids)[static_cast<size_t>(row)];
    auto it = labels.labels.find(id);
    if (it == labels.labels.end()) continue;
    const Eigen::VectorXd e = corpus.data.row(row).transpose().cast<double>();
    const Eigen::VectorXd recon = decode(model, encode(model, e));
    if (it->second) {
      sum_pos += recon;
      ++n_pos;
    } else {
      sum_neg += recon;
      ++n_neg;
    }
  }
  if (n_pos == 0 || n_neg == 0) {
    throw UsageError("build_context: both classes must be present in train_indices");
  }
  SteeringContext ctx;
  ctx.centroid_pos = sum_pos / static_cast<double>(n_pos);
  ctx.centroid_neg = sum_neg / static_cast<double>(n_neg);
  if (ctx.centroid_pos.norm() == 0.0 || ctx.centroid_neg.norm() == 0.0) {
    throw NumericalError("build_context: zero-norm centroid");
  }
  return ctx;
}

LatentVector steer_latent(const LatentVector& v, const SteerConfig& config) {
  config.validate(static_cast<int>(v.size()));
  LatentVector steered = v;
  steered[config.phi] =
      config.direction == SteerDirection::kActivate ? config.a_phi : -config.a_phi;
  return steered;
}

double relative_similarity(const Eigen::VectorXd& x, const SteeringContext& ctx) {
  const double nx = x.norm();
  const double np = ctx.centroid_pos.norm();
  const double nn = ctx.centroid_neg.norm();
  if (nx == 0.0 || np == 0.0 || nn == 0.0) {
    throw NumericalError("relative_similarity: zero-norm vector");
  }
  return x.dot(ctx.centroid_pos) / (nx * np) - x.dot(ctx.centroid_neg) / (nx * nn);
}

SteeringReport run_steering(const SaeModel& model, const SteeringContext& ctx,
                            const EmbeddingCorpus& corpus, const LabelSet& labels,
                            const std::vector<Eigen::Index>& test_indices,
                            const SteerConfig& config) {
  config.validate(model.config.latent_dim);
  if (!corpus.sample_ids) {
    throw UsageError("run_steering requires a corpus with sample ids");
  }

  SteeringReport report;
  double sum_pos_before = 0.0, sum_pos_after = 0.0;
  double sum_neg_before = 0.0, sum_neg_after = 0.0;
  long n_pos = 0, n_neg = 0;

  SteerConfig deactivate = config;
  deactivate.direction = SteerDirection::kDeactivate;
  SteerConfig activate = config;
  activate.direction = SteerDirection::kActivate;

  for (Eigen::Index row : test_indices) {
    if (row < 0 || row >= corpus.count()) {
      throw ValidationError("test index out of range: " + std::to_string(row));
    }
    const auto& id = (*corpus.sample_ids)[static_cast<size_t>(row)];
    auto it = labels.labels.find(id);
    if (it == labels.labels.end()) continue;
    const bool positive = it->second;

    const Eigen::VectorXd e = corpus.data.row(row).transpose().cast<double>();
    const LatentVector v = encode(model, e);
    const LatentVector steered = steer_latent(v, positive ? deactivate : activate);

    SteeringSample sample;
    sample.sample_id = id;
    sample.positive = positive;
    sample.delta_before = relative_similarity(decode(model, v), ctx);
    sample.delta_after = relative_similarity(decode(model, steered), ctx);

    if (positive) {
      sum_pos_before += sample.delta_before;
      sum_pos_after += sample.delta_after;
      ++n_pos;
      report.hist_pos_before.add(sample.delta_before);
      report.hist_pos_after.add(sample.delta_after);
    } else {
      sum_neg_before += sample.delta_before;
      sum_neg_after += sample.delta_after;
      ++n_neg;
      report.hist_neg_before.add(sample.delta_before);
      report.hist_neg_after.add(sample.delta_after);
    }
    report.samples.push_back(std::move(sample));
  }
  if (n_pos == 0 && n_neg == 0) {
    throw UsageError("run_steering: no labeled samples in test_indices");
  }
  if (n_pos > 0) {
    report.mean_pos_before = sum_pos_before / static_cast<double>(n_pos);
    report.mean_pos_after = sum_pos_after / static_cast<double>(n_pos);
  }
  if (n_neg > 0) {
    report.mean_neg_before = sum_neg_before / static_cast<double>(n_neg);
    report.mean_neg_after = sum_neg_after / static_cast<double>(n_neg);
  }
  return report;
}

}  // namespace latentlens
