// Copyright 2026 The latentlens authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace latentlens {

using RowMajorMatrixXf =
    Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// A corpus of N fixed-dimension dense embeddings, one per row, with optional
// per-row sample/speaker identifiers. Immutable after load; safe to share
// read-only across threads.
struct EmbeddingCorpus {
  int dim = 0;                    // M
  RowMajorMatrixXf data;          // N x M, float32
  std::optional<std::vector<std::string>> sample_ids;
  std::optional<std::vector<std::string>> speaker_ids;

  Eigen::Index count() const { return data.rows(); }

  // Row index for a sample id; requires sample_ids.
  std::optional<Eigen::Index> find_sample(const std::string& id) const;

  // Throws ValidationError if the invariants do not hold (shape consistency,
  // finite values, unique sample ids).
  void validate() const;
};

// Binary labels for one attribute, keyed by sample id. Strata are auxiliary
// metadata (e.g. perceived gender) consumed only by the splitting analysis.
struct LabelSet {
  std::string positive_label;
  std::map<std::string, bool> labels;
  std::map<std::string, std::string> strata;

  int positives() const;
  int negatives() const;
};

// Disjoint train/test row-index partition of a corpus.
struct CorpusSplit {
  std::vector<Eigen::Index> train_indices;
  std::vector<Eigen::Index> test_indices;

  void validate(Eigen::Index n) const;
};

// Deterministic shuffled split: floor(test_fraction * n) rows go to test.
CorpusSplit make_split(Eigen::Index n, double test_fraction, uint64_t seed);

// Row subset in the given order, ids carried along.
EmbeddingCorpus subset_corpus(const EmbeddingCorpus& corpus,
                              const std::vector<Eigen::Index>& rows);

// EMBC container, bit-exact little-endian:
//   bytes  0-3   magic "EMBC"
//   bytes  4-7   version     u32 = 1
//   bytes  8-15  N           u64
//   bytes 16-19  M           u32
//   bytes 20-23  id flags    u32 (bit0 sample ids, bit1 speaker ids)
//   N*M float32 payload, row-major
//   length-prefixed UTF-8 id lists for each set flag bit, in bit order
void write_corpus(const EmbeddingCorpus& corpus, std::ostream& out);
void write_corpus_file(const EmbeddingCorpus& corpus,
                       const std::filesystem::path& path);

// Validates magic, version, payload length, flags, finiteness and id
// uniqueness. Structural problems throw FormatError, non-finite payload
// values throw ValidationError.
EmbeddingCorpus read_corpus(std::istream& in);
EmbeddingCorpus read_corpus_file(const std::filesystem::path& path);

// Label CSV with header `sample_id,label[,stratum]`; labels parse from
// {0,1,true,false}. Every sample id must resolve to a corpus row and both
// classes must be present.
LabelSet read_labels(std::istream& in, const EmbeddingCorpus& corpus,
                     const std::string& positive_label);
LabelSet read_labels_file(const std::filesystem::path& path,
                          const EmbeddingCorpus& corpus,
                          const std::string& positive_label);
void write_labels(const LabelSet& labels, std::ostream& out);

}  // namespace latentlens
