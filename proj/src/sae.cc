// Copyright 2026 The latentlens authors
// SPDX-License-Identifier: Apache-2.0

#include "latentlens/sae.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include <json.hpp>

#include "latentlens/error.h"
#include "latentlens/io_util.h"

namespace latentlens {

namespace {

constexpr char kMagic[4] = {'S', 'A', 'E', 'C'};
constexpr uint32_t kVersion = 1;

// Selected support of the k largest values; lowest index wins among equals.
void topk_select(const Eigen::VectorXd& z, int k, std::vector<int>& out) {
  const int n = static_cast<int>(z.size());
  out.resize(n);
  std::iota(out.begin(), out.end(), 0);
  auto better = [&z](int a, int b) {
    if (z[a] != z[b]) return z[a] > z[b];
    return a < b;
  };
  std::partial_sort(out.begin(), out.begin() + k, out.end(), better);
  out.resize(k);
}

void apply_activation(const SaeConfig& cfg, Eigen::MatrixXd& z) {
  if (cfg.activation == ActivationKind::kRelu) {
    z = z.cwiseMax(0.0);
    return;
  }
  std::vector<int> keep;
  Eigen::VectorXd col(z.rows());
  for (Eigen::Index c = 0; c < z.cols(); ++c) {
    col = z.col(c);
    topk_select(col, cfg.topk, keep);
    z.col(c).setZero();
    for (int idx : keep) z(idx, c) = col[idx];
  }
}

Eigen::MatrixXd center_columns(const SaeModel& model, const Eigen::MatrixXd& inputs) {
  return inputs.colwise() - model.input_mean;
}

}  // namespace

void SaeConfig::validate() const {
  if (input_dim < 1) throw ValidationError("input_dim must be >= 1");
  if (latent_dim < 1) throw ValidationError("latent_dim must be >= 1");
  if (activation == ActivationKind::kTopK) {
    if (topk < 1 || topk > latent_dim) {
      throw ValidationError("TopK requires 1 <= k <= latent_dim, got k=" +
                            std::to_string(topk) + " L=" +
                            std::to_string(latent_dim));
    }
  } else if (l1_lambda < 0.0) {
    throw ValidationError("l1_lambda must be non-negative");
  }
  if (learning_rate <= 0.0) throw ValidationError("learning_rate must be positive");
  if (batch_size < 1) throw ValidationError("batch_size must be >= 1");
  if (epochs < 0) throw ValidationError("epochs must be non-negative");
}

void SaeModel::validate() const {
  config.validate();
  const int m = config.input_dim;
  const int l = config.latent_dim;
  if (enc_weight.rows() != l || enc_weight.cols() != m ||
      enc_bias.size() != l || dec_weight.rows() != m ||
      dec_weight.cols() != l || dec_bias.size() != m ||
      input_mean.size() != m) {
    throw ShapeError("model parameter shapes inconsistent with config");
  }
  if (!enc_weight.allFinite() || !enc_bias.allFinite() ||
      !dec_weight.allFinite() || !dec_bias.allFinite() ||
      !input_mean.allFinite()) {
    throw ValidationError("model parameters contain non-finite values");
  }
}

LatentVector encode(const SaeModel& model, const Eigen::VectorXd& e) {
  if (e.size() != model.config.input_dim) {
    throw ShapeError("encode: input length " + std::to_string(e.size()) +
                     " != input_dim " + std::to_string(model.config.input_dim));
  }
  Eigen::MatrixXd z = encode_batch(model, e);
  return z.col(0);
}

Eigen::MatrixXd encode_batch(const SaeModel& model, const Eigen::MatrixXd& inputs) {
  if (inputs.rows() != model.config.input_dim) {
    throw ShapeError("encode_batch: input rows != input_dim");
  }
  Eigen::MatrixXd z =
      (model.enc_weight * center_columns(model, inputs)).colwise() + model.enc_bias;
  apply_activation(model.config, z);
  return z;
}

Eigen::VectorXd decode(const SaeModel& model, const LatentVector& v) {
  if (v.size() != model.config.latent_dim) {
    throw ShapeError("decode: latent length " + std::to_string(v.size()) +
                     " != latent_dim " + std::to_string(model.config.latent_dim));
  }
  return model.dec_weight * v + model.dec_bias + model.input_mean;
}

Eigen::MatrixXd decode_batch(const SaeModel& model, const Eigen::MatrixXd& latents) {
  if (latents.rows() != model.config.latent_dim) {
    throw ShapeError("decode_batch: latent rows != latent_dim");
  }
  return ((model.dec_weight * latents).colwise() + model.dec_bias).colwise() +
         model.input_mean;
}

double loss(const SaeModel& model, const Eigen::MatrixXd& batch,
            SaeGradients* grads, double* mse_out) {
  if (batch.cols() == 0) throw UsageError("loss: empty batch");
  if (batch.rows() != model.config.input_dim) {
    throw ShapeError("loss: batch rows != input_dim");
  }
  const double b = static_cast<double>(batch.cols());
  const double m = static_cast<double>(model.config.input_dim);
  const bool relu = model.config.activation == ActivationKind::kRelu;

  const Eigen::MatrixXd x = center_columns(model, batch);
  Eigen::MatrixXd v = (model.enc_weight * x).colwise() + model.enc_bias;
  apply_activation(model.config, v);

  // residual = reconstruction - input; input_mean cancels against centering
  const Eigen::MatrixXd residual =
      ((model.dec_weight * v).colwise() + model.dec_bias) - x;

  const double mse = residual.squaredNorm() / (b * m);
  double total = mse;
  if (relu && model.config.l1_lambda > 0.0) {
    total += model.config.l1_lambda * v.cwiseAbs().sum() / b;
  }
  if (mse_out) *mse_out = mse;

  if (grads) {
    const Eigen::MatrixXd d_recon = residual * (2.0 / (b * m));
    grads->dec_bias = d_recon.rowwise().sum();
    grads->dec_weight = d_recon * v.transpose();
    Eigen::MatrixXd dv = model.dec_weight.transpose() * d_recon;
    if (relu && model.config.l1_lambda > 0.0) {
      dv += (model.config.l1_lambda / b) *
            v.unaryExpr([](double a) { return a > 0.0 ? 1.0 : (a < 0.0 ? -1.0 : 0.0); });
    }
    // straight-through: gradient flows only on the active support
    const Eigen::MatrixXd dz =
        dv.cwiseProduct((v.array() != 0.0).cast<double>().matrix());
    grads->enc_bias = dz.rowwise().sum();
    grads->enc_weight = dz * x.transpose();
  }
  return total;
}

namespace {

double validation_mse(const SaeModel& model, const Eigen::MatrixXd& val_cols) {
  constexpr Eigen::Index kChunk = 4096;
  double sq = 0.0;
  for (Eigen::Index start = 0; start < val_cols.cols(); start += kChunk) {
    const Eigen::Index n = std::min(kChunk, val_cols.cols() - start);
    const Eigen::MatrixXd chunk = val_cols.middleCols(start, n);
    const Eigen::MatrixXd recon = decode_batch(model, encode_batch(model, chunk));
    sq += (recon - chunk).squaredNorm();
  }
  return sq / (static_cast<double>(val_cols.cols()) *
               static_cast<double>(val_cols.rows()));
}

int dead_latent_count_cols(const SaeModel& model, const Eigen::MatrixXd& cols,
                           double threshold) {
  constexpr Eigen::Index kChunk = 4096;
  Eigen::VectorXd max_abs = Eigen::VectorXd::Zero(model.config.latent_dim);
  for (Eigen::Index start = 0; start < cols.cols(); start += kChunk) {
    const Eigen::Index n = std::min(kChunk, cols.cols() - start);
    const Eigen::MatrixXd v = encode_batch(model, cols.middleCols(start, n));
    max_abs = max_abs.cwiseMax(v.cwiseAbs().rowwise().maxCoeff());
  }
  int dead = 0;
  for (Eigen::Index i = 0; i < max_abs.size(); ++i) {
    if (!(max_abs[i] > threshold)) ++dead;
  }
  return dead;
}

void renormalize_decoder(SaeModel& model) {
  for (Eigen::Index c = 0; c < model.dec_weight.cols(); ++c) {
    const double norm = model.dec_weight.col(c).norm();
    if (norm > 0.0) model.dec_weight.col(c) /= norm;
  }
}

struct AdamState {
  Eigen::MatrixXd m, v;
  explicit AdamState(Eigen::Index rows, Eigen::Index cols)
      : m(Eigen::MatrixXd::Zero(rows, cols)), v(Eigen::MatrixXd::Zero(rows, cols)) {}

  void step(Eigen::Ref<Eigen::MatrixXd> param, const Eigen::MatrixXd& grad,
            double lr, long t) {
    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    m = beta1 * m + (1.0 - beta1) * grad;
    v = beta2 * v + (1.0 - beta2) * grad.cwiseProduct(grad);
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    param -= (lr / c1) *
             (m.array() / ((v.array() / c2).sqrt() + eps)).matrix();
  }
};

}  // namespace

std::pair<SaeModel, TrainStats> train(const SaeConfig& config,
                                      const EmbeddingCorpus& train_corpus,
                                      const EmbeddingCorpus& val_corpus) {
  config.validate();
  if (train_corpus.dim != config.input_dim || val_corpus.dim != config.input_dim) {
    throw ShapeError("train: corpus dim != config.input_dim");
  }
  if (train_corpus.count() == 0) throw UsageError("train: empty training corpus");
  if (val_corpus.count() == 0) throw UsageError("train: empty validation corpus");

  const Eigen::Index n = train_corpus.count();
  const int m = config.input_dim;
  const int l = config.latent_dim;

  // samples as columns, double precision
  const Eigen::MatrixXd train_cols = train_corpus.data.transpose().cast<double>();
  const Eigen::MatrixXd val_cols = val_corpus.data.transpose().cast<double>();

  SaeModel model;
  model.config = config;
  model.input_mean = config.center_inputs ? Eigen::VectorXd(train_cols.rowwise().mean())
                                          : Eigen::VectorXd::Zero(m);

  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  model.dec_weight.resize(m, l);
  for (Eigen::Index j = 0; j < l; ++j) {
    for (Eigen::Index i = 0; i < m; ++i) model.dec_weight(i, j) = normal(rng);
  }
  renormalize_decoder(model);
  model.enc_weight = model.dec_weight.transpose();
  model.enc_bias = Eigen::VectorXd::Zero(l);
  model.dec_bias = Eigen::VectorXd::Zero(m);

  TrainStats stats;
  stats.initial_val_mse = validation_mse(model, val_cols);

  AdamState adam_enc_w(l, m), adam_enc_b(l, 1), adam_dec_w(m, l), adam_dec_b(m, 1);
  SaeGradients grads;
  std::vector<Eigen::Index> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), 0);

  long step = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_sq_sum = 0.0;
    Eigen::Index seen = 0;
    for (Eigen::Index start = 0; start < n; start += config.batch_size) {
      const Eigen::Index bs = std::min<Eigen::Index>(config.batch_size, n - start);
      Eigen::MatrixXd batch(m, bs);
      for (Eigen::Index i = 0; i < bs; ++i) {
        batch.col(i) = train_cols.col(order[static_cast<size_t>(start + i)]);
      }
      double batch_mse = 0.0;
      const double batch_loss = loss(model, batch, &grads, &batch_mse);
      if (!std::isfinite(batch_loss)) {
        throw TrainingError("training loss is non-finite at epoch " +
                            std::to_string(epoch), epoch);
      }
      epoch_sq_sum += batch_mse * static_cast<double>(bs);
      seen += bs;
      ++step;
      adam_enc_w.step(model.enc_weight, grads.enc_weight, config.learning_rate, step);
      adam_enc_b.step(model.enc_bias, grads.enc_bias, config.learning_rate, step);
      adam_dec_w.step(model.dec_weight, grads.dec_weight, config.learning_rate, step);
      adam_dec_b.step(model.dec_bias, grads.dec_bias, config.learning_rate, step);
      renormalize_decoder(model);
    }
    stats.train_mse.push_back(epoch_sq_sum / static_cast<double>(seen));
    stats.val_mse.push_back(validation_mse(model, val_cols));
    stats.dead_latent_count.push_back(dead_latent_count_cols(model, val_cols, 0.0));
    stats.epochs_completed = epoch + 1;
  }
  return {std::move(model), std::move(stats)};
}

std::vector<int> dead_latents(const SaeModel& model,
                              const EmbeddingCorpus& corpus, double threshold) {
  if (corpus.dim != model.config.input_dim) {
    throw ShapeError("dead_latents: corpus dim != input_dim");
  }
  constexpr Eigen::Index kChunk = 4096;
  Eigen::VectorXd max_abs = Eigen::VectorXd::Zero(model.config.latent_dim);
  const Eigen::MatrixXd cols = corpus.data.transpose().cast<double>();
  for (Eigen::Index start = 0; start < cols.cols(); start += kChunk) {
    const Eigen::Index c = std::min(kChunk, cols.cols() - start);
    const Eigen::MatrixXd v = encode_batch(model, cols.middleCols(start, c));
    max_abs = max_abs.cwiseMax(v.cwiseAbs().rowwise().maxCoeff());
  }
  std::vector<int> dead;
  for (Eigen::Index i = 0; i < max_abs.size(); ++i) {
    if (!(max_abs[i] > threshold)) dead.push_back(static_cast<int>(i));
  }
  return dead;
}

namespace {

nlohmann::json config_to_json(const SaeConfig& cfg) {
  return nlohmann::json{
      {"input_dim", cfg.input_dim},
      {"latent_dim", cfg.latent_dim},
      {"activation", cfg.activation == ActivationKind::kTopK ? "topk" : "relu"},
      {"topk", cfg.topk},
      {"l1_lambda", cfg.l1_lambda},
      {"learning_rate", cfg.learning_rate},
      {"batch_size", cfg.batch_size},
      {"epochs", cfg.epochs},
      {"seed", cfg.seed},
      {"center_inputs", cfg.center_inputs}};
}

SaeConfig config_from_json(const nlohmann::json& j) {
  SaeConfig cfg;
  cfg.input_dim = j.at("input_dim").get<int>();
  cfg.latent_dim = j.at("latent_dim").get<int>();
  const auto act = j.at("activation").get<std::string>();
  if (act == "topk") {
    cfg.activation = ActivationKind::kTopK;
  } else if (act == "relu") {
    cfg.activation = ActivationKind::kRelu;
  } else {
    throw FormatError("unknown activation '" + act + "'");
  }
  cfg.topk = j.at("topk").get<int>();
  cfg.l1_lambda = j.at("l1_lambda").get<double>();
  cfg.learning_rate = j.at("learning_rate").get<double>();
  cfg.batch_size = j.at("batch_size").get<int>();
  cfg.epochs = j.at("epochs").get<int>();
  cfg.seed = j.at("seed").get<uint64_t>();
  cfg.center_inputs = j.at("center_inputs").get<bool>();
  return cfg;
}

void write_blob(std::ostream& out, const Eigen::MatrixXd& mat) {
  for (Eigen::Index i = 0; i < mat.rows(); ++i) {
    for (Eigen::Index j = 0; j < mat.cols(); ++j) {
      write_f32_le(out, static_cast<float>(mat(i, j)));
    }
  }
}

void read_blob(std::istream& in, Eigen::MatrixXd& mat) {
  for (Eigen::Index i = 0; i < mat.rows(); ++i) {
    for (Eigen::Index j = 0; j < mat.cols(); ++j) {
      mat(i, j) = static_cast<double>(read_f32_le(in));
    }
  }
}

void read_blob(std::istream& in, Eigen::VectorXd& vec) {
  for (Eigen::Index i = 0; i < vec.size(); ++i) {
    vec[i] = static_cast<double>(read_f32_le(in));
  }
}

}  // namespace

void save_model(const SaeModel& model, std::ostream& out) {
  model.validate();
  out.write(kMagic, 4);
  write_u32_le(out, kVersion);
  nlohmann::json header{
      {"config", config_to_json(model.config)},
      {"shapes",
       {{"input_dim", model.config.input_dim},
        {"latent_dim", model.config.latent_dim}}},
      {"seed", model.config.seed}};
  write_string_lp(out, header.dump());
  write_blob(out, model.enc_weight);
  write_blob(out, model.enc_bias);
  write_blob(out, model.dec_weight);
  write_blob(out, model.dec_bias);
  write_blob(out, model.input_mean);
  if (!out) throw IoError("checkpoint write failed");
}

void save_model_file(const SaeModel& model, const std::filesystem::path& path) {
  std::ostringstream buf(std::ios::binary);
  save_model(model, buf);
  try {
    atomic_write_file(path, buf.str());
  } catch (const IoError& e) {
    throw IoError("writing checkpoint " + path.string() + ": " + e.what());
  }
}

SaeModel load_model(std::istream& in) {
  char magic[4] = {};
  in.read(magic, 4);
  if (in.gcount() != 4 || std::memcmp(magic, kMagic, 4) != 0) {
    throw FormatError("bad magic, not a SAEC checkpoint");
  }
  const uint32_t version = read_u32_le(in);
  if (version != kVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(read_string_lp(in, 1u << 24));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("invalid checkpoint header: ") + e.what());
  }
  SaeModel model;
  try {
    model.config = config_from_json(header.at("config"));
    const auto& shapes = header.at("shapes");
    if (shapes.at("input_dim").get<int>() != model.config.input_dim ||
        shapes.at("latent_dim").get<int>() != model.config.latent_dim) {
      throw FormatError("checkpoint shape metadata disagrees with config");
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("invalid checkpoint header: ") + e.what());
  }
  const int m = model.config.input_dim;
  const int l = model.config.latent_dim;
  model.enc_weight.resize(l, m);
  model.enc_bias.resize(l);
  model.dec_weight.resize(m, l);
  model.dec_bias.resize(m);
  model.input_mean.resize(m);
  try {
    read_blob(in, model.enc_weight);
    read_blob(in, model.enc_bias);
    read_blob(in, model.dec_weight);
    read_blob(in, model.dec_bias);
    read_blob(in, model.input_mean);
  } catch (const FormatError&) {
    throw FormatError("checkpoint truncated");
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw FormatError("trailing bytes after checkpoint payload");
  }
  model.validate();
  return model;
}

SaeModel load_model_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path.string());
  try {
    return load_model(in);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace latentlens
