// Copyright 2026 The latentlens authors
// SPDX-License-Identifier: Apache-2.0

#include "latentlens/synth.h"

#include <doctest.h>

#include <cmath>

#include "latentlens/error.h"
#include "latentlens/probe.h"
#include "test_util.h"

using namespace latentlens;
using latentlens::testing::serialize_corpus;

namespace {

SynthSpec one_attribute_spec() {
  SynthSpec spec;
  spec.dim = 16;
  spec.n_samples = 300;
  spec.n_speakers = 10;
  spec.noise_sigma = 0.05;
  spec.seed = 11;
  PlantedAttribute attr;
  attr.name = "attr";
  attr.prevalence = 0.4;
  attr.strength = 1.0;
  spec.attributes.push_back(attr);
  return spec;
}

}  // namespace

TEST_CASE("Gram-Schmidt on a 2-D example") {
  Eigen::VectorXd a(2), b(2);
  a << 1.0, 0.0;
  b << 1.0, 1.0;
  const auto basis = orthogonalize({a, b});
  REQUIRE(basis.size() == 2);
  CHECK((basis[0] - a).norm() < 1e-12);
  Eigen::VectorXd e1(2);
  e1 << 0.0, 1.0;
  CHECK((basis[1] - e1).norm() < 1e-12);
}

TEST_CASE("an already-unit vector passes through unchanged") {
  Eigen::VectorXd v(2);
  v << 3.0 / 5.0, 4.0 / 5.0;
  const auto basis = orthogonalize({v});
  REQUIRE(basis.size() == 1);
  CHECK((basis[0] - v).norm() < 1e-12);
}

TEST_CASE("orthogonalize yields a near-orthonormal set on random input") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Eigen::VectorXd> dirs;
  for (int i = 0; i < 6; ++i) {
    Eigen::VectorXd v(10);
    for (int j = 0; j < 10; ++j) v[j] = normal(rng);
    dirs.push_back(v);
  }
  const auto basis = orthogonalize(dirs);
  for (size_t i = 0; i < basis.size(); ++i) {
    CHECK(std::abs(basis[i].norm() - 1.0) < 1e-6);
    for (size_t j = 0; j < i; ++j) {
      CHECK(std::abs(basis[i].dot(basis[j])) < 1e-6);
    }
  }
}

TEST_CASE("orthogonalize rejects rank-deficient input") {
  Eigen::VectorXd a(3), b(3);
  a << 1.0, 2.0, 0.0;
  b = 2.0 * a;
  CHECK_THROWS_AS(orthogonalize({a, b}), SpecError);
}

TEST_CASE("orthogonalize rejects more directions than dimensions") {
  Eigen::VectorXd a(2), b(2), c(2);
  a << 1.0, 0.0;
  b << 0.0, 1.0;
  c << 1.0, 1.0;
  CHECK_THROWS_AS(orthogonalize({a, b, c}), SpecError);
}

TEST_CASE("generation is deterministic") {
  const SynthSpec spec = one_attribute_spec();
  const SynthResult a = generate(spec);
  const SynthResult b = generate(spec);
  CHECK(serialize_corpus(a.corpus) == serialize_corpus(b.corpus));
  CHECK(a.labels[0].labels == b.labels[0].labels);
  CHECK(a.truth.speaker == b.truth.speaker);

  SynthSpec other = spec;
  other.seed += 1;
  CHECK(serialize_corpus(generate(other).corpus) != serialize_corpus(a.corpus));
}

TEST_CASE("zero-strength attributes are invisible") {
  SynthSpec spec = one_attribute_spec();
  spec.noise_sigma = 0.0;
  spec.attributes[0].strength = 0.0;
  const SynthResult result = generate(spec);
  // same speaker implies identical embedding, whatever the label says
  for (Eigen::Index i = 0; i < result.corpus.count(); ++i) {
    for (Eigen::Index j = i + 1; j < result.corpus.count(); ++j) {
      if (result.truth.speaker[static_cast<size_t>(i)] !=
          result.truth.speaker[static_cast<size_t>(j)]) {
        continue;
      }
      CHECK(result.corpus.data.row(i) == result.corpus.data.row(j));
    }
  }
}

TEST_CASE("ground truth is total over samples, attributes, subcomponents") {
  SynthSpec spec = one_attribute_spec();
  PlantedAttribute split_attr;
  split_attr.name = "split_attr";
  split_attr.prevalence = 0.5;
  split_attr.strength = 1.0;
  split_attr.n_subcomponents = 2;
  split_attr.subcomponent_mix = 0.4;
  spec.attributes.push_back(split_attr);
  const SynthResult result = generate(spec);

  REQUIRE(result.truth.active.size() == 2);
  REQUIRE(result.truth.subcomponent.size() == 2);
  const auto n = static_cast<size_t>(spec.n_samples);
  for (size_t a = 0; a < 2; ++a) {
    CHECK(result.truth.active[a].size() == n);
    CHECK(result.truth.subcomponent[a].size() == n);
  }
  CHECK(result.labels[1].strata.size() == n);

  // labels mirror ground truth
  for (Eigen::Index i = 0; i < spec.n_samples; ++i) {
    const auto& id = (*result.corpus.sample_ids)[static_cast<size_t>(i)];
    CHECK(result.labels[0].labels.at(id) ==
          result.truth.active[0][static_cast<size_t>(i)]);
  }

  // subcomponent directions came out orthonormal
  const auto& dirs = result.spec.attributes[1].subcomponents;
  REQUIRE(dirs.size() == 2);
  CHECK(std::abs(dirs[0].norm() - 1.0) < 1e-9);
  CHECK(std::abs(dirs[0].dot(dirs[1])) < 1e-9);
}

TEST_CASE("subcomponent mix controls the stratum balance") {
  SynthSpec spec = one_attribute_spec();
  spec.n_samples = 4000;
  spec.attributes[0].n_subcomponents = 2;
  spec.attributes[0].subcomponent_mix = 0.3;
  const SynthResult result = generate(spec);
  long sub0 = 0;
  for (int s : result.truth.subcomponent[0]) sub0 += s == 0 ? 1 : 0;
  const double fraction = static_cast<double>(sub0) / 4000.0;
  CHECK(fraction > 0.25);
  CHECK(fraction < 0.35);
}

TEST_CASE("more directions than dimensions is infeasible") {
  SynthSpec spec = one_attribute_spec();
  spec.dim = 1;
  spec.attributes[0].n_subcomponents = 2;
  CHECK_THROWS_AS(generate(spec), SpecError);
}

TEST_CASE("planted attribute is linearly separable on raw embeddings") {
  // oracle precondition for the SAE acceptance pipeline: verified with the
  // probe module's own solver
  SynthSpec spec;
  spec.dim = 64;
  spec.n_samples = 20000;
  spec.n_speakers = 200;
  spec.noise_sigma = 0.1;
  spec.seed = 42;
  PlantedAttribute attr;
  attr.name = "attr";
  attr.prevalence = 0.4;
  attr.strength = 1.0;
  spec.attributes.push_back(attr);
  const SynthResult result = generate(spec);

  const CorpusSplit split = make_split(spec.n_samples, 0.2, 7);
  auto gather = [&](const std::vector<Eigen::Index>& rows, Eigen::MatrixXd& x,
                    Eigen::VectorXd& y) {
    x.resize(static_cast<Eigen::Index>(rows.size()), spec.dim);
    y.resize(static_cast<Eigen::Index>(rows.size()));
    for (size_t i = 0; i < rows.size(); ++i) {
      x.row(static_cast<Eigen::Index>(i)) = result.corpus.data.row(rows[i]).cast<double>();
      y[static_cast<Eigen::Index>(i)] =
          result.truth.active[0][static_cast<size_t>(rows[i])] ? 1.0 : 0.0;
    }
  };
  Eigen::MatrixXd x_train, x_test;
  Eigen::VectorXd y_train, y_test;
  gather(split.train_indices, x_train, y_train);
  gather(split.test_indices, x_test, y_test);

  ProbeConfig config;
  config.l2_lambda = 1e-3;
  config.max_iters = 2000;
  config.tolerance = 1e-6;
  const LogisticModel lr = fit_logistic(x_train, y_train, config);

  const Eigen::VectorXd z = (x_test * lr.weights).array() + lr.intercept;
  long correct = 0;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    correct += ((z[i] > 0.0) == (y_test[i] > 0.5)) ? 1 : 0;
  }
  const double accuracy = static_cast<double>(correct) / static_cast<double>(z.size());
  CHECK(accuracy > 0.99);
}

TEST_CASE("spec json errors name the offending field") {
  nlohmann::json j{{"dim", 8},
                   {"n_samples", 10},
                   {"n_speakers", 2},
                   {"noise_sigma", 0.1},
                   {"seed", 1}};
  try {
    synth_spec_from_json(j);
    FAIL("expected SpecError");
  } catch (const SpecError& e) {
    CHECK(std::string(e.what()).find("attributes") != std::string::npos);
  }

  j["attributes"] = nlohmann::json::array({{{"name", "x"}, {"strength", 1.0}}});
  try {
    synth_spec_from_json(j);
    FAIL("expected SpecError");
  } catch (const SpecError& e) {
    CHECK(std::string(e.what()).find("prevalence") != std::string::npos);
  }
}

TEST_CASE("spec json roundtrips") {
  SynthSpec spec = one_attribute_spec();
  spec.attributes[0].n_subcomponents = 2;
  spec.attributes[0].subcomponent_mix = 0.4;
  const SynthSpec back = synth_spec_from_json(synth_spec_to_json(spec));
  CHECK(back.dim == spec.dim);
  CHECK(back.n_samples == spec.n_samples);
  CHECK(back.seed == spec.seed);
  REQUIRE(back.attributes.size() == 1);
  CHECK(back.attributes[0].n_subcomponents == 2);
  CHECK(back.attributes[0].subcomponent_mix == 0.4);
}
