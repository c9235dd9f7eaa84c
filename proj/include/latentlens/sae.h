// Copyright 2026 The latentlens authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <ostream>
#include <utility>
#include <vector>

#include "latentlens/corpus.h"

namespace latentlens {

enum class ActivationKind { kTopK, kRelu };

struct SaeConfig {
  int input_dim = 0;   // M
  int latent_dim = 0;  // L
  ActivationKind activation = ActivationKind::kTopK;
  int topk = 10;           // TopK only
  double l1_lambda = 0.0;  // ReLU only
  double learning_rate = 1e-3;
  int batch_size = 64;
  int epochs = 20;
  uint64_t seed = 0;
  bool center_inputs = true;

  void validate() const;
};

// Linear encoder/decoder pair around a sparse latent layer. Parameters are
// kept in double precision; the checkpoint format stores them as float32.
// Trained models are immutable and shareable across threads.
struct SaeModel {
  Eigen::MatrixXd enc_weight;  // L x M
  Eigen::VectorXd enc_bias;    // L
  Eigen::MatrixXd dec_weight;  // M x L
  Eigen::VectorXd dec_bias;    // M
  Eigen::VectorXd input_mean;  // M, zero when center_inputs is off
  SaeConfig config;

  void validate() const;
};

using LatentVector = Eigen::VectorXd;

struct TrainStats {
  std::vector<double> train_mse;  // per epoch, over shuffled training batches
  std::vector<double> val_mse;    // per epoch
  std::vector<int> dead_latent_count;  // per epoch, on the validation corpus
  double initial_val_mse = 0.0;        // untrained model, same init seed
  int epochs_completed = 0;

  int final_dead_latents() const {
    return dead_latent_count.empty() ? 0 : dead_latent_count.back();
  }
};

// v = Activation(enc_weight * (e - input_mean) + enc_bias). TopK keeps the k
// largest pre-activations by value (lowest index wins ties) and zeroes the
// rest; ReLU clamps negatives.
LatentVector encode(const SaeModel& model, const Eigen::VectorXd& e);

// Column-batched encode: inputs M x B, latents L x B.
Eigen::MatrixXd encode_batch(const SaeModel& model, const Eigen::MatrixXd& inputs);

// eps = dec_weight * v + dec_bias + input_mean.
Eigen::VectorXd decode(const SaeModel& model, const LatentVector& v);
Eigen::MatrixXd decode_batch(const SaeModel& model, const Eigen::MatrixXd& latents);

struct SaeGradients {
  Eigen::MatrixXd enc_weight;
  Eigen::VectorXd enc_bias;
  Eigen::MatrixXd dec_weight;
  Eigen::VectorXd dec_bias;
};

// Loss over a column batch (M x B): mean over the batch of per-sample mean
// squared reconstruction error, plus l1_lambda * mean latent L1 norm for the
// ReLU variant. Gradients are analytic with the sparsity mask treated as
// constant (straight-through on the selected support). `mse_out`, when given,
// receives the reconstruction term alone.
double loss(const SaeModel& model, const Eigen::MatrixXd& batch,
            SaeGradients* grads = nullptr, double* mse_out = nullptr);

// Adam over shuffled mini-batches, deterministic for a fixed seed. Decoder
// columns are renormalized to unit norm after every step. Throws
// TrainingError (with the epoch index) if the loss goes non-finite.
std::pair<SaeModel, TrainStats> train(const SaeConfig& config,
                                      const EmbeddingCorpus& train_corpus,
                                      const EmbeddingCorpus& val_corpus);

// Latent indices whose activation magnitude never exceeds `threshold`
// anywhere in the corpus.
std::vector<int> dead_latents(const SaeModel& model,
                              const EmbeddingCorpus& corpus,
                              double threshold = 0.0);

// SAEC checkpoint: magic "SAEC", u32 version=1, length-prefixed JSON header
// (config + shapes + seed), then float32 LE blobs in fixed order
// (enc_weight, enc_bias, dec_weight, dec_bias, input_mean), row-major.
void save_model(const SaeModel& model, std::ostream& out);
void save_model_file(const SaeModel& model, const std::filesystem::path& path);
SaeModel load_model(std::istream& in);
SaeModel load_model_file(const std::filesystem::path& path);

}  // namespace latentlens
