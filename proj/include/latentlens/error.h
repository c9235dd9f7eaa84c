// Copyright 2026 The latentlens authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace latentlens {

// Malformed or corrupted on-disk artifact (bad magic, version, truncation).
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Well-formed input whose content violates a data invariant.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Infeasible or inconsistent synthesis specification.
class SpecError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Dimension mismatch between tensors/models.
class ShapeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// API misuse (empty batch, empty index set, ...).
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Training diverged (non-finite loss).
class TrainingError : public std::runtime_error {
 public:
  TrainingError(const std::string& what, int epoch)
      : std::runtime_error(what), epoch(epoch) {}
  int epoch;
};

// Iterative solver failed to reach tolerance within its budget.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double last_grad_norm)
      : std::runtime_error(what), last_grad_norm(last_grad_norm) {}
  double last_grad_norm;
};

// Degenerate numeric input (zero-norm vector where a direction is needed).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Filesystem failure, carries the offending path in the message.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace latentlens
