// Copyright 2026 The latentlens authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "latentlens/corpus.h"

namespace latentlens {

// A binary attribute planted into synthetic embeddings. The attribute is one
// or two unit directions in embedding space; two orthogonal subcomponents
// model substructure (so feature splitting has a ground truth to split on).
struct PlantedAttribute {
  std::string name;
  double prevalence = 0.5;   // in (0,1)
  double strength = 1.0;     // >= 0
  int n_subcomponents = 1;   // 1 or 2; used when `subcomponents` is empty
  std::vector<Eigen::VectorXd> subcomponents;  // sampled at generate() if empty
  std::optional<double> subcomponent_mix;      // P(subcomponent 0), in (0,1)
  // Probability that the emitted stratum tag matches the sample's true
  // subcomponent, modeling imperfect perceived-attribute annotation.
  double stratum_fidelity = 1.0;  // in (0.5, 1]
};

struct SynthSpec {
  int dim = 0;            // M
  Eigen::Index n_samples = 0;
  int n_speakers = 1;
  std::vector<PlantedAttribute> attributes;
  double noise_sigma = 0.0;
  uint64_t seed = 0;

  void validate() const;  // throws SpecError
};

// Per-sample generation record: which attributes were active and which
// subcomponent each sample carries (drawn for every sample, applied only
// when the attribute is active).
struct GroundTruth {
  std::vector<int> speaker;                          // n_samples
  std::vector<std::vector<bool>> active;             // [attribute][sample]
  std::vector<std::vector<int>> subcomponent;        // [attribute][sample]
  std::vector<std::vector<int>> stratum;             // perceived tag, may differ
};

struct SynthResult {
  EmbeddingCorpus corpus;
  std::vector<LabelSet> labels;  // one per attribute, strata from subcomponents
  GroundTruth truth;
  // finalized specification, directions included
  SynthSpec spec;
};

// Gram-Schmidt orthonormalization. Inputs must be linearly independent and
// count <= dim; pairwise inner products of the output are < 1e-6 and norms
// within 1e-6 of 1.
std::vector<Eigen::VectorXd> orthogonalize(
    const std::vector<Eigen::VectorXd>& directions);

// Each sample = unit-normalized per-speaker Gaussian base
//             + sum of strength * direction over active attributes
//             + isotropic Gaussian noise.
// Attributes activate independently per sample with their prevalence; missing
// attribute directions are sampled from the seed and the full direction set
// is orthonormalized. Deterministic for a fixed spec.
SynthResult generate(const SynthSpec& spec);

// JSON spec exchange for the CLI. Direction vectors are never serialized;
// they are reproducible from the seed.
SynthSpec synth_spec_from_json(const nlohmann::json& j);
nlohmann::json synth_spec_to_json(const SynthSpec& spec);
nlohmann::json ground_truth_to_json(const SynthResult& result);

}  // namespace latentlens
