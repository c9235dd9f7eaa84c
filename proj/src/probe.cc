// Copyright 2026 The latentlens authors
// SPDX-License-Identifier: Apache-2.0

#include "latentlens/probe.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "latentlens/error.h"

namespace latentlens {

void ProbeConfig::validate() const {
  if (l2_lambda < 0.0) throw ValidationError("l2_lambda must be non-negative");
  if (max_iters < 1) throw ValidationError("max_iters must be >= 1");
  if (!(tolerance > 0.0)) throw ValidationError("tolerance must be positive");
}

double logistic_loss(const Eigen::MatrixXd& features,
                     const Eigen::VectorXd& targets, const Eigen::VectorXd& w,
                     double b, double l2_lambda, Eigen::VectorXd* grad_w,
                     double* grad_b) {
  const auto n = features.rows();
  if (n == 0) throw UsageError("logistic_loss: empty feature matrix");
  if (features.cols() != w.size() || targets.size() != n) {
    throw ShapeError("logistic_loss: inconsistent shapes");
  }
  const Eigen::VectorXd z = (features * w).array() + b;
  // stable cross-entropy: max(z,0) + log1p(exp(-|z|)) - y*z
  double ce = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    ce += std::max(z[i], 0.0) + std::log1p(std::exp(-std::abs(z[i]))) -
          targets[i] * z[i];
  }
  const double loss = ce / static_cast<double>(n) + 0.5 * l2_lambda * w.squaredNorm();
  if (grad_w || grad_b) {
    const Eigen::VectorXd p = 1.0 / (1.0 + (-z.array()).exp());
    const Eigen::VectorXd delta = p - targets;
    if (grad_w) {
      *grad_w = features.transpose() * delta / static_cast<double>(n) +
                l2_lambda * w;
    }
    if (grad_b) *grad_b = delta.mean();
  }
  return loss;
}

namespace {

// Largest eigenvalue of [X 1]^T [X 1] / n by power iteration; bounds the
// curvature of the logistic objective (sigmoid'' <= 1/4).
double gram_spectral_norm(const Eigen::MatrixXd& x) {
  const auto n = static_cast<double>(x.rows());
  Eigen::VectorXd v = Eigen::VectorXd::Ones(x.cols() + 1).normalized();
  double lambda = 0.0;
  for (int it = 0; it < 100; ++it) {
    const Eigen::VectorXd xv =
        x * v.head(x.cols()) + Eigen::VectorXd::Constant(x.rows(), v[x.cols()]);
    Eigen::VectorXd av(x.cols() + 1);
    av.head(x.cols()) = x.transpose() * xv / n;
    av[x.cols()] = xv.sum() / n;
    const double next = av.norm();
    if (next == 0.0) return 0.0;
    av /= next;
    if (std::abs(next - lambda) <= 1e-10 * std::max(1.0, next)) {
      lambda = next;
      break;
    }
    lambda = next;
    v = av;
  }
  return lambda;
}

}  // namespace

LogisticModel fit_logistic(const Eigen::MatrixXd& features,
                           const Eigen::VectorXd& targets,
                           const ProbeConfig& config) {
  config.validate();
  const auto d = features.cols();

  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> normal(0.0, 0.01);
  Eigen::VectorXd w(d);
  for (Eigen::Index i = 0; i < d; ++i) w[i] = normal(rng);
  double b = 0.0;

  // Nesterov-accelerated full-batch descent with function-value restart;
  // fixed step from the curvature bound keeps the run deterministic.
  const double lipschitz =
      0.25 * gram_spectral_norm(features) + config.l2_lambda;
  const double step = 1.0 / std::max(lipschitz, 1e-12);

  Eigen::VectorXd w_prev = w, yw = w;
  double b_prev = b, yb = b;
  double t_momentum = 1.0;
  double prev_loss = std::numeric_limits<double>::infinity();

  LogisticModel model;
  Eigen::VectorXd grad_w(d);
  double grad_b = 0.0;
  for (int iter = 0; iter < config.max_iters; ++iter) {
    logistic_loss(features, targets, yw, yb, config.l2_lambda, &grad_w, &grad_b);
    w_prev = w;
    b_prev = b;
    w = yw - step * grad_w;
    b = yb - step * grad_b;

    Eigen::VectorXd grad_x(d);
    double grad_xb = 0.0;
    const double loss_now = logistic_loss(features, targets, w, b,
                                          config.l2_lambda, &grad_x, &grad_xb);
    const double grad_norm = std::max(grad_x.cwiseAbs().maxCoeff(), std::abs(grad_xb));
    model.final_grad_norm = grad_norm;
    if (grad_norm < config.tolerance) {
      model.weights = w;
      model.intercept = b;
      model.final_loss = loss_now;
      model.iterations = iter + 1;
      return model;
    }

    if (loss_now > prev_loss) {
      t_momentum = 1.0;  // adaptive restart
      yw = w;
      yb = b;
    } else {
      const double t_next =
          0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t_momentum * t_momentum));
      const double beta = (t_momentum - 1.0) / t_next;
      yw = w + beta * (w - w_prev);
      yb = b + beta * (b - b_prev);
      t_momentum = t_next;
    }
    prev_loss = loss_now;
  }
  throw ConvergenceError(
      "logistic regression did not converge in " +
          std::to_string(config.max_iters) +
          " iterations (grad norm " + std::to_string(model.final_grad_norm) + ")",
      model.final_grad_norm);
}

Eigen::MatrixXd encode_rows(const SaeModel& model, const EmbeddingCorpus& corpus,
                            const std::vector<Eigen::Index>& rows) {
  const int m = model.config.input_dim;
  if (corpus.dim != m) throw ShapeError("encode_rows: corpus dim != input_dim");
  Eigen::MatrixXd cols(m, static_cast<Eigen::Index>(rows.size()));
  for (size_t i = 0; i < rows.size(); ++i) {
    cols.col(static_cast<Eigen::Index>(i)) =
        corpus.data.row(rows[i]).transpose().cast<double>();
  }
  return encode_batch(model, cols).transpose();
}

namespace {

struct LabeledRows {
  std::vector<Eigen::Index> rows;
  Eigen::VectorXd targets;
};

LabeledRows collect_labeled(const EmbeddingCorpus& corpus, const LabelSet& labels,
                            const std::vector<Eigen::Index>& indices) {
  if (!corpus.sample_ids) {
    throw UsageError("probing requires a corpus with sample ids");
  }
  LabeledRows out;
  std::vector<double> y;
  for (Eigen::Index row : indices) {
    if (row < 0 || row >= corpus.count()) {
      throw ValidationError("split index out of range: " + std::to_string(row));
    }
    const auto& id = (*corpus.sample_ids)[static_cast<size_t>(row)];
    auto it = labels.labels.find(id);
    if (it == labels.labels.end()) continue;
    out.rows.push_back(row);
    y.push_back(it->second ? 1.0 : 0.0);
  }
  out.targets = Eigen::Map<Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(y.size()));
  return out;
}

void require_both_classes(const Eigen::VectorXd& y, const char* partition) {
  const double s = y.sum();
  if (y.size() == 0 || s == 0.0 || s == static_cast<double>(y.size())) {
    throw UsageError(std::string("labels constant on ") + partition +
                     " partition; both classes required");
  }
}

}  // namespace

ProbeResult fit_probe(const SaeModel& model, const EmbeddingCorpus& corpus,
                      const LabelSet& labels, const CorpusSplit& split,
                      const ProbeConfig& config) {
  split.validate(corpus.count());
  const LabeledRows train = collect_labeled(corpus, labels, split.train_indices);
  const LabeledRows test = collect_labeled(corpus, labels, split.test_indices);
  require_both_classes(train.targets, "train");
  require_both_classes(test.targets, "test");

  const Eigen::MatrixXd x_train = encode_rows(model, corpus, train.rows);
  const LogisticModel lr = fit_logistic(x_train, train.targets, config);

  ProbeResult result;
  result.weights = lr.weights;
  result.intercept = lr.intercept;
  result.train_loss = lr.final_loss;
  result.iterations = lr.iterations;

  long correct = 0;
  const Eigen::VectorXd z = (x_train * lr.weights).array() + lr.intercept;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    correct += ((z[i] > 0.0) == (train.targets[i] > 0.5)) ? 1 : 0;
  }
  result.train_accuracy = static_cast<double>(correct) / static_cast<double>(z.size());

  Eigen::Index phi = 0;
  lr.weights.maxCoeff(&phi);
  result.phi = static_cast<int>(phi);

  result.test = evaluate_index(model, result.phi, corpus, labels, split.test_indices);
  return result;
}

IndexEval evaluate_index(const SaeModel& model, int phi,
                         const EmbeddingCorpus& corpus, const LabelSet& labels,
                         const std::vector<Eigen::Index>& index_set) {
  if (index_set.empty()) throw UsageError("evaluate_index: empty index set");
  if (phi < 0 || phi >= model.config.latent_dim) {
    throw ShapeError("evaluate_index: phi out of range");
  }
  const LabeledRows eval = collect_labeled(corpus, labels, index_set);
  if (eval.rows.empty()) throw UsageError("evaluate_index: no labeled rows in index set");

  const Eigen::MatrixXd latents = encode_rows(model, corpus, eval.rows);
  IndexEval out;
  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(eval.rows.size()); ++i) {
    const bool predicted = latents(i, phi) > 0.0;
    const bool actual = eval.targets[i] > 0.5;
    const auto& id = (*corpus.sample_ids)[static_cast<size_t>(eval.rows[static_cast<size_t>(i)])];
    if (predicted && actual) {
      ++out.confusion.tp;
    } else if (predicted && !actual) {
      ++out.confusion.fp;
      out.false_positive_ids.push_back(id);
    } else if (!predicted && actual) {
      ++out.confusion.fn;
      out.false_negative_ids.push_back(id);
    } else {
      ++out.confusion.tn;
    }
  }
  const long predicted_pos = out.confusion.tp + out.confusion.fp;
  const long actual_pos = out.confusion.tp + out.confusion.fn;
  out.zero_positive_predictions = predicted_pos == 0;
  out.precision = predicted_pos == 0
                      ? 0.0
                      : static_cast<double>(out.confusion.tp) /
                            static_cast<double>(predicted_pos);
  out.recall = actual_pos == 0 ? 0.0
                               : static_cast<double>(out.confusion.tp) /
                                     static_cast<double>(actual_pos);
  return out;
}

std::vector<ProbeGridRow> probe_grid(const GridResult& grid,
                                     const EmbeddingCorpus& corpus,
                                     const LabelSet& labels,
                                     const CorpusSplit& split,
                                     const ProbeConfig& config) {
  std::vector<ProbeGridRow> rows;
  for (const auto& cell : grid.cells) {
    ProbeGridRow row;
    row.latent_dim = cell.latent_dim;
    row.k = cell.k;
    if (cell.status != CellStatus::kCompleted && cell.status != CellStatus::kResumed) {
      row.error = "cell not trained";
      rows.push_back(std::move(row));
      continue;
    }
    try {
      const SaeModel model = load_model_file(cell.checkpoint_path);
      const ProbeResult probe = fit_probe(model, corpus, labels, split, config);
      row.ok = true;
      row.phi = probe.phi;
      row.precision = probe.test.precision;
      row.recall = probe.test.recall;
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace latentlens
