// Copyright 2026 The latentlens authors
// SPDX-License-Identifier: Apache-2.0

#include "latentlens/corpus.h"

#include <doctest.h>

#include <set>
#include <sstream>

#include "latentlens/error.h"
#include "test_util.h"

using namespace latentlens;
using latentlens::testing::random_corpus;
using latentlens::testing::serialize_corpus;

namespace {

EmbeddingCorpus deserialize(const std::string& bytes) {
  std::istringstream in(bytes, std::ios::binary);
  return read_corpus(in);
}

}  // namespace

TEST_CASE("empty corpus serializes to the 24-byte header") {
  EmbeddingCorpus corpus;
  corpus.dim = 4;
  corpus.data.resize(0, 4);
  const std::string bytes = serialize_corpus(corpus);
  CHECK(bytes.size() == 24);
  CHECK(bytes.substr(0, 4) == "EMBC");
}

TEST_CASE("payload is IEEE-754 float32 little-endian, row-major") {
  EmbeddingCorpus corpus;
  corpus.dim = 2;
  corpus.data.resize(1, 2);
  corpus.data(0, 0) = 1.0f;
  corpus.data(0, 1) = 2.0f;
  const std::string bytes = serialize_corpus(corpus);
  REQUIRE(bytes.size() == 24 + 8);
  const unsigned char expected[8] = {0x00, 0x00, 0x80, 0x3F, 0x00, 0x00, 0x00, 0x40};
  for (int i = 0; i < 8; ++i) {
    CHECK(static_cast<unsigned char>(bytes[24 + i]) == expected[i]);
  }
}

TEST_CASE("roundtrip is bitwise over random corpora") {
  for (uint64_t seed = 0; seed < 30; ++seed) {
    std::mt19937_64 rng(seed);
    const auto n = static_cast<Eigen::Index>(rng() % 40);
    const int m = 1 + static_cast<int>(rng() % 12);
    const bool ids = (rng() % 2) == 0;
    const EmbeddingCorpus corpus = random_corpus(n, m, seed, ids);
    const std::string bytes = serialize_corpus(corpus);
    const EmbeddingCorpus back = deserialize(bytes);
    CHECK(serialize_corpus(back) == bytes);
    REQUIRE(back.count() == corpus.count());
    CHECK(back.dim == corpus.dim);
    CHECK(back.data == corpus.data);
    CHECK(back.sample_ids == corpus.sample_ids);
    CHECK(back.speaker_ids == corpus.speaker_ids);
  }
}

TEST_CASE("bad magic is rejected") {
  std::string bytes = serialize_corpus(random_corpus(3, 2, 9));
  bytes[0] = 'X';
  bytes[1] = 'X';
  CHECK_THROWS_AS(deserialize(bytes), FormatError);
}

TEST_CASE("declared rows beyond the payload are rejected") {
  EmbeddingCorpus corpus;
  corpus.dim = 3;
  corpus.data.resize(2, 3);
  corpus.data.setZero();
  std::string bytes = serialize_corpus(corpus);
  bytes.resize(24 + 3 * 4);  // keep one row of the two declared
  CHECK_THROWS_AS(deserialize(bytes), FormatError);
}

TEST_CASE("trailing bytes are rejected") {
  std::string bytes = serialize_corpus(random_corpus(2, 2, 10, false));
  bytes += '\0';
  CHECK_THROWS_AS(deserialize(bytes), FormatError);
}

TEST_CASE("non-finite payload values are rejected") {
  EmbeddingCorpus corpus;
  corpus.dim = 2;
  corpus.data.resize(1, 2);
  corpus.data(0, 0) = 1.0f;
  corpus.data(0, 1) = 2.0f;
  std::string bytes = serialize_corpus(corpus);
  // overwrite the second float with +inf (0x7F800000 LE)
  bytes[28] = '\x00';
  bytes[29] = '\x00';
  bytes[30] = '\x80';
  bytes[31] = '\x7F';
  CHECK_THROWS_AS(deserialize(bytes), ValidationError);
}

TEST_CASE("single-byte header corruption that changes the declaration is detected") {
  const EmbeddingCorpus corpus = random_corpus(5, 3, 21);
  const std::string bytes = serialize_corpus(corpus);
  for (size_t pos = 0; pos < 24; ++pos) {
    for (unsigned char flip : {0x01, 0x80}) {
      std::string corrupted = bytes;
      corrupted[pos] = static_cast<char>(corrupted[pos] ^ flip);
      CHECK_THROWS_AS(deserialize(corrupted), std::runtime_error);
    }
  }
}

TEST_CASE("label CSV joins against the corpus") {
  const EmbeddingCorpus corpus = random_corpus(3, 2, 1);  // ids s0, s1, s2
  std::istringstream in("sample_id,label\ns0,1\ns1,0\ns2,true\n");
  const LabelSet labels = read_labels(in, corpus, "attr");
  CHECK(labels.labels.at("s0") == true);
  CHECK(labels.labels.at("s1") == false);
  CHECK(labels.labels.at("s2") == true);
  CHECK(labels.positives() == 2);
  CHECK(labels.negatives() == 1);
  CHECK(labels.strata.empty());
}

TEST_CASE("label CSV rejects unknown sample ids by name") {
  const EmbeddingCorpus corpus = random_corpus(2, 2, 2);
  std::istringstream in("sample_id,label\ns9,1\ns0,0\n");
  try {
    read_labels(in, corpus, "attr");
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("s9") != std::string::npos);
  }
}

TEST_CASE("label CSV rejects unparsable labels with a line number") {
  const EmbeddingCorpus corpus = random_corpus(2, 2, 3);
  std::istringstream in("sample_id,label\ns0,1\ns1,maybe\n");
  try {
    read_labels(in, corpus, "attr");
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
}

TEST_CASE("label CSV needs both classes") {
  const EmbeddingCorpus corpus = random_corpus(2, 2, 4);
  std::istringstream in("sample_id,label\ns0,1\ns1,1\n");
  CHECK_THROWS_AS(read_labels(in, corpus, "attr"), ValidationError);
}

TEST_CASE("label CSV carries strata") {
  const EmbeddingCorpus corpus = random_corpus(3, 2, 5);
  std::istringstream in("sample_id,label,stratum\ns0,1,f\ns1,0,m\ns2,1,\n");
  const LabelSet labels = read_labels(in, corpus, "attr");
  CHECK(labels.strata.at("s0") == "f");
  CHECK(labels.strata.at("s1") == "m");
  CHECK(labels.strata.count("s2") == 0);
}

TEST_CASE("label roundtrip through write_labels") {
  const EmbeddingCorpus corpus = random_corpus(3, 2, 6);
  std::istringstream in("sample_id,label,stratum\ns0,1,f\ns1,0,m\ns2,0,f\n");
  const LabelSet labels = read_labels(in, corpus, "attr");
  std::ostringstream out;
  write_labels(labels, out);
  std::istringstream again(out.str());
  const LabelSet back = read_labels(again, corpus, "attr");
  CHECK(back.labels == labels.labels);
  CHECK(back.strata == labels.strata);
}

TEST_CASE("make_split partitions deterministically") {
  const CorpusSplit a = make_split(100, 0.2, 7);
  const CorpusSplit b = make_split(100, 0.2, 7);
  CHECK(a.train_indices == b.train_indices);
  CHECK(a.test_indices == b.test_indices);
  CHECK(a.test_indices.size() == 20);
  CHECK(a.train_indices.size() == 80);
  a.validate(100);

  std::set<Eigen::Index> all(a.train_indices.begin(), a.train_indices.end());
  all.insert(a.test_indices.begin(), a.test_indices.end());
  CHECK(all.size() == 100);

  const CorpusSplit c = make_split(100, 0.2, 8);
  CHECK(c.test_indices != a.test_indices);
}

TEST_CASE("subset_corpus keeps rows and ids aligned") {
  const EmbeddingCorpus corpus = random_corpus(6, 3, 11);
  const EmbeddingCorpus sub = subset_corpus(corpus, {4, 1});
  REQUIRE(sub.count() == 2);
  CHECK(sub.data.row(0) == corpus.data.row(4));
  CHECK(sub.data.row(1) == corpus.data.row(1));
  CHECK((*sub.sample_ids)[0] == "s4");
  CHECK((*sub.sample_ids)[1] == "s1");
}
