// Copyright 2026 The latentlens authors
// SPDX-License-Identifier: Apache-2.0

#include "latentlens/corpus.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <random>
#include <set>
#include <sstream>
#include <vector>

#include "latentlens/error.h"
#include "latentlens/io_util.h"

namespace latentlens {

namespace {

constexpr char kMagic[4] = {'E', 'M', 'B', 'C'};
constexpr uint32_t kVersion = 1;
constexpr uint32_t kFlagSampleIds = 1u << 0;
constexpr uint32_t kFlagSpeakerIds = 1u << 1;

void write_id_list(std::ostream& out, const std::vector<std::string>& ids) {
  for (const auto& id : ids) write_string_lp(out, id);
}

std::vector<std::string> read_id_list(std::istream& in, uint64_t n) {
  std::vector<std::string> ids;
  ids.reserve(n);
  for (uint64_t i = 0; i < n; ++i) ids.push_back(read_string_lp(in));
  return ids;
}

}  // namespace

std::optional<Eigen::Index> EmbeddingCorpus::find_sample(
    const std::string& id) const {
  if (!sample_ids) return std::nullopt;
  auto it = std::find(sample_ids->begin(), sample_ids->end(), id);
  if (it == sample_ids->end()) return std::nullopt;
  return static_cast<Eigen::Index>(it - sample_ids->begin());
}

void EmbeddingCorpus::validate() const {
  if (dim <= 0) throw ValidationError("corpus dim must be positive");
  if (data.cols() != dim) {
    throw ValidationError("corpus data has " + std::to_string(data.cols()) +
                          " columns, expected " + std::to_string(dim));
  }
  if (!data.allFinite()) {
    throw ValidationError("corpus contains non-finite values");
  }
  if (sample_ids) {
    if (static_cast<Eigen::Index>(sample_ids->size()) != count()) {
      throw ValidationError("sample_ids length does not match row count");
    }
    std::set<std::string> seen;
    for (const auto& id : *sample_ids) {
      if (!seen.insert(id).second) {
        throw ValidationError("duplicate sample id: " + id);
      }
    }
  }
  if (speaker_ids &&
      static_cast<Eigen::Index>(speaker_ids->size()) != count()) {
    throw ValidationError("speaker_ids length does not match row count");
  }
}

int LabelSet::positives() const {
  int n = 0;
  for (const auto& [id, v] : labels) n += v ? 1 : 0;
  return n;
}

int LabelSet::negatives() const {
  return static_cast<int>(labels.size()) - positives();
}

void CorpusSplit::validate(Eigen::Index n) const {
  std::set<Eigen::Index> train(train_indices.begin(), train_indices.end());
  for (Eigen::Index i : test_indices) {
    if (train.count(i)) {
      throw ValidationError("index " + std::to_string(i) +
                            " appears in both train and test");
    }
  }
  for (Eigen::Index i : train_indices) {
    if (i < 0 || i >= n) throw ValidationError("train index out of range");
  }
  for (Eigen::Index i : test_indices) {
    if (i < 0 || i >= n) throw ValidationError("test index out of range");
  }
}

CorpusSplit make_split(Eigen::Index n, double test_fraction, uint64_t seed) {
  if (test_fraction < 0.0 || test_fraction > 1.0) {
    throw UsageError("test_fraction must be in [0,1]");
  }
  std::vector<Eigen::Index> order(static_cast<size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_test = static_cast<size_t>(std::floor(test_fraction * double(n)));
  CorpusSplit split;
  split.test_indices.assign(order.begin(), order.begin() + n_test);
  split.train_indices.assign(order.begin() + n_test, order.end());
  std::sort(split.test_indices.begin(), split.test_indices.end());
  std::sort(split.train_indices.begin(), split.train_indices.end());
  return split;
}

EmbeddingCorpus subset_corpus(const EmbeddingCorpus& corpus,
                              const std::vector<Eigen::Index>& rows) {
  EmbeddingCorpus sub;
  sub.dim = corpus.dim;
  sub.data.resize(static_cast<Eigen::Index>(rows.size()), corpus.dim);
  if (corpus.sample_ids) sub.sample_ids.emplace();
  if (corpus.speaker_ids) sub.speaker_ids.emplace();
  for (size_t i = 0; i < rows.size(); ++i) {
    const Eigen::Index row = rows[i];
    if (row < 0 || row >= corpus.count()) {
      throw ValidationError("subset row out of range: " + std::to_string(row));
    }
    sub.data.row(static_cast<Eigen::Index>(i)) = corpus.data.row(row);
    if (corpus.sample_ids) {
      sub.sample_ids->push_back((*corpus.sample_ids)[static_cast<size_t>(row)]);
    }
    if (corpus.speaker_ids) {
      sub.speaker_ids->push_back((*corpus.speaker_ids)[static_cast<size_t>(row)]);
    }
  }
  return sub;
}

void write_corpus(const EmbeddingCorpus& corpus, std::ostream& out) {
  corpus.validate();
  out.write(kMagic, 4);
  write_u32_le(out, kVersion);
  write_u64_le(out, static_cast<uint64_t>(corpus.count()));
  write_u32_le(out, static_cast<uint32_t>(corpus.dim));
  uint32_t flags = 0;
  if (corpus.sample_ids) flags |= kFlagSampleIds;
  if (corpus.speaker_ids) flags |= kFlagSpeakerIds;
  write_u32_le(out, flags);
  for (Eigen::Index i = 0; i < corpus.count(); ++i) {
    for (Eigen::Index j = 0; j < corpus.dim; ++j) {
      write_f32_le(out, corpus.data(i, j));
    }
  }
  if (corpus.sample_ids) write_id_list(out, *corpus.sample_ids);
  if (corpus.speaker_ids) write_id_list(out, *corpus.speaker_ids);
  if (!out) throw IoError("corpus write failed");
}

void write_corpus_file(const EmbeddingCorpus& corpus,
                       const std::filesystem::path& path) {
  std::ostringstream buf(std::ios::binary);
  write_corpus(corpus, buf);
  try {
    atomic_write_file(path, buf.str());
  } catch (const IoError& e) {
    throw IoError("writing corpus " + path.string() + ": " + e.what());
  }
}

EmbeddingCorpus read_corpus(std::istream& in) {
  char magic[4] = {};
  in.read(magic, 4);
  if (in.gcount() != 4 || std::memcmp(magic, kMagic, 4) != 0) {
    throw FormatError("bad magic, not an EMBC stream");
  }
  const uint32_t version = read_u32_le(in);
  if (version != kVersion) {
    throw FormatError("unsupported EMBC version " + std::to_string(version));
  }
  const uint64_t n = read_u64_le(in);
  const uint32_t m = read_u32_le(in);
  if (m == 0) throw FormatError("declared dim is zero");
  const uint32_t flags = read_u32_le(in);
  if (flags & ~(kFlagSampleIds | kFlagSpeakerIds)) {
    throw FormatError("unknown id flags " + std::to_string(flags));
  }

  if (m != 0 && n > std::numeric_limits<uint64_t>::max() / m) {
    throw FormatError("declared shape overflows");
  }
  const uint64_t total = n * m;

  // grow with the actual data so a corrupt declared shape cannot trigger a
  // huge allocation
  std::vector<float> payload;
  bool finite = true;
  for (uint64_t i = 0; i < total; ++i) {
    float v;
    try {
      v = read_f32_le(in);
    } catch (const FormatError&) {
      throw FormatError("payload truncated: declared " + std::to_string(n) +
                        "x" + std::to_string(m) + " values");
    }
    finite = finite && std::isfinite(v);
    payload.push_back(v);
  }

  EmbeddingCorpus corpus;
  corpus.dim = static_cast<int>(m);
  corpus.data.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
  for (uint64_t i = 0; i < n; ++i) {
    for (uint32_t j = 0; j < m; ++j) {
      corpus.data(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          payload[i * m + j];
    }
  }
  if (flags & kFlagSampleIds) corpus.sample_ids = read_id_list(in, n);
  if (flags & kFlagSpeakerIds) corpus.speaker_ids = read_id_list(in, n);
  if (in.peek() != std::char_traits<char>::eof()) {
    throw FormatError("trailing bytes after corpus payload");
  }
  if (!finite) throw ValidationError("corpus payload contains NaN or Inf");
  corpus.validate();
  return corpus;
}

EmbeddingCorpus read_corpus_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open corpus: " + path.string());
  try {
    return read_corpus(in);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

bool parse_bool_label(const std::string& raw, bool& out) {
  if (raw == "1" || raw == "true") {
    out = true;
    return true;
  }
  if (raw == "0" || raw == "false") {
    out = false;
    return true;
  }
  return false;
}

}  // namespace

LabelSet read_labels(std::istream& in, const EmbeddingCorpus& corpus,
                     const std::string& positive_label) {
  if (!corpus.sample_ids) {
    throw ValidationError("label join requires a corpus with sample ids");
  }
  LabelSet set;
  set.positive_label = positive_label;

  std::string line;
  int line_no = 0;
  bool has_stratum = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (line_no == 1) {
      if (fields.size() < 2 || fields[0] != "sample_id" || fields[1] != "label") {
        throw ValidationError("label CSV header must be sample_id,label[,stratum]");
      }
      has_stratum = fields.size() >= 3 && fields[2] == "stratum";
      continue;
    }
    if (fields.size() < 2) {
      throw ValidationError("line " + std::to_string(line_no) +
                            ": expected sample_id,label");
    }
    const std::string& id = fields[0];
    if (!corpus.find_sample(id)) {
      throw ValidationError("unknown sample id: " + id);
    }
    bool value = false;
    if (!parse_bool_label(fields[1], value)) {
      throw ValidationError("line " + std::to_string(line_no) +
                            ": unparsable label '" + fields[1] + "'");
    }
    if (set.labels.count(id)) {
      throw ValidationError("duplicate label for sample id: " + id);
    }
    set.labels[id] = value;
    if (has_stratum && fields.size() >= 3 && !fields[2].empty()) {
      set.strata[id] = fields[2];
    }
  }
  if (set.positives() == 0 || set.negatives() == 0) {
    throw ValidationError("label set needs at least one positive and one negative");
  }
  return set;
}

LabelSet read_labels_file(const std::filesystem::path& path,
                          const EmbeddingCorpus& corpus,
                          const std::string& positive_label) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open labels: " + path.string());
  try {
    return read_labels(in, corpus, positive_label);
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

void write_labels(const LabelSet& labels, std::ostream& out) {
  const bool has_strata = !labels.strata.empty();
  out << "sample_id,label" << (has_strata ? ",stratum" : "") << "\n";
  for (const auto& [id, value] : labels.labels) {
    out << id << ',' << (value ? 1 : 0);
    if (has_strata) {
      auto it = labels.strata.find(id);
      out << ',' << (it == labels.strata.end() ? "" : it->second);
    }
    out << "\n";
  }
}

}  // namespace latentlens
