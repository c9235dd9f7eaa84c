// Copyright 2026 The latentlens authors
// SPDX-License-Identifier: Apache-2.0

#include "latentlens/synth.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <set>

#include "latentlens/error.h"

namespace latentlens {

void SynthSpec::validate() const {
  if (dim < 1) throw SpecError("dim must be >= 1");
  if (n_samples < 0) throw SpecError("n_samples must be non-negative");
  if (n_speakers < 1) throw SpecError("n_speakers must be >= 1");
  if (noise_sigma < 0.0) throw SpecError("noise_sigma must be non-negative");
  std::set<std::string> names;
  int total_directions = 0;
  for (const auto& attr : attributes) {
    if (attr.name.empty()) throw SpecError("attribute name must be non-empty");
    if (!names.insert(attr.name).second) {
      throw SpecError("duplicate attribute name: " + attr.name);
    }
    if (!(attr.prevalence > 0.0 && attr.prevalence < 1.0)) {
      throw SpecError("attribute " + attr.name + ": prevalence must be in (0,1)");
    }
    if (attr.strength < 0.0) {
      throw SpecError("attribute " + attr.name + ": strength must be non-negative");
    }
    const int n_sub = attr.subcomponents.empty()
                          ? attr.n_subcomponents
                          : static_cast<int>(attr.subcomponents.size());
    if (n_sub != 1 && n_sub != 2) {
      throw SpecError("attribute " + attr.name + ": subcomponents must be 1 or 2");
    }
    if (attr.subcomponent_mix &&
        !(*attr.subcomponent_mix > 0.0 && *attr.subcomponent_mix < 1.0)) {
      throw SpecError("attribute " + attr.name + ": subcomponent_mix must be in (0,1)");
    }
    if (!(attr.stratum_fidelity > 0.5 && attr.stratum_fidelity <= 1.0)) {
      throw SpecError("attribute " + attr.name +
                      ": stratum_fidelity must be in (0.5, 1]");
    }
    for (const auto& d : attr.subcomponents) {
      if (d.size() != dim) {
        throw SpecError("attribute " + attr.name + ": direction length != dim");
      }
    }
    total_directions += n_sub;
  }
  if (total_directions > dim) {
    throw SpecError("more attribute directions (" +
                    std::to_string(total_directions) + ") than dim (" +
                    std::to_string(dim) + ")");
  }
}

std::vector<Eigen::VectorXd> orthogonalize(
    const std::vector<Eigen::VectorXd>& directions) {
  if (directions.empty()) return {};
  const Eigen::Index dim = directions.front().size();
  if (static_cast<Eigen::Index>(directions.size()) > dim) {
    throw SpecError("orthogonalize: more directions than dimensions");
  }
  std::vector<Eigen::VectorXd> basis;
  basis.reserve(directions.size());
  for (const auto& d : directions) {
    if (d.size() != dim) throw SpecError("orthogonalize: inconsistent lengths");
    Eigen::VectorXd u = d;
    for (const auto& b : basis) u -= b.dot(u) * b;
    // second pass for numerical orthogonality
    for (const auto& b : basis) u -= b.dot(u) * b;
    const double norm = u.norm();
    if (norm < 1e-10 * std::max(1.0, d.norm())) {
      throw SpecError("orthogonalize: rank-deficient direction set");
    }
    basis.push_back(u / norm);
  }
  return basis;
}

SynthResult generate(const SynthSpec& input_spec) {
  input_spec.validate();
  SynthResult result;
  result.spec = input_spec;
  SynthSpec& spec = result.spec;

  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::uniform_int_distribution<int> speaker_dist(0, spec.n_speakers - 1);

  auto draw_vector = [&](Eigen::Index n) {
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = normal(rng);
    return v;
  };

  // Sample any missing attribute directions, then orthonormalize the full
  // set so subcomponents are mutually orthogonal and independent across
  // attributes.
  std::vector<Eigen::VectorXd> all_directions;
  for (auto& attr : spec.attributes) {
    if (attr.subcomponents.empty()) {
      for (int s = 0; s < attr.n_subcomponents; ++s) {
        attr.subcomponents.push_back(draw_vector(spec.dim));
      }
    }
    attr.n_subcomponents = static_cast<int>(attr.subcomponents.size());
    for (const auto& d : attr.subcomponents) all_directions.push_back(d);
  }
  all_directions = orthogonalize(all_directions);
  {
    size_t pos = 0;
    for (auto& attr : spec.attributes) {
      for (auto& d : attr.subcomponents) d = all_directions[pos++];
    }
  }

  std::vector<Eigen::VectorXd> speaker_base(static_cast<size_t>(spec.n_speakers));
  for (auto& base : speaker_base) {
    base = draw_vector(spec.dim);
    const double norm = base.norm();
    if (norm > 0.0) base /= norm;
  }

  const auto n = spec.n_samples;
  const auto n_attr = spec.attributes.size();
  result.corpus.dim = spec.dim;
  result.corpus.data.resize(n, spec.dim);
  result.corpus.sample_ids.emplace();
  result.corpus.speaker_ids.emplace();
  result.truth.speaker.resize(static_cast<size_t>(n));
  result.truth.active.assign(n_attr, std::vector<bool>(static_cast<size_t>(n)));
  result.truth.subcomponent.assign(n_attr, std::vector<int>(static_cast<size_t>(n)));
  result.truth.stratum.assign(n_attr, std::vector<int>(static_cast<size_t>(n)));

  Eigen::VectorXd sample(spec.dim);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int speaker = speaker_dist(rng);
    result.truth.speaker[static_cast<size_t>(i)] = speaker;
    sample = speaker_base[static_cast<size_t>(speaker)];
    for (size_t a = 0; a < n_attr; ++a) {
      const auto& attr = spec.attributes[a];
      const bool active = uniform(rng) < attr.prevalence;
      // subcomponent is a property of the sample, drawn whether or not the
      // attribute fires, so ground truth stays total; the perceived stratum
      // tag matches it with probability stratum_fidelity
      int sub = 0;
      int perceived = 0;
      if (attr.subcomponents.size() == 2) {
        const double mix = attr.subcomponent_mix.value_or(0.5);
        sub = uniform(rng) < mix ? 0 : 1;
        perceived = uniform(rng) < attr.stratum_fidelity ? sub : 1 - sub;
      }
      result.truth.active[a][static_cast<size_t>(i)] = active;
      result.truth.subcomponent[a][static_cast<size_t>(i)] = sub;
      result.truth.stratum[a][static_cast<size_t>(i)] = perceived;
      if (active) {
        sample += attr.strength * attr.subcomponents[static_cast<size_t>(sub)];
      }
    }
    if (spec.noise_sigma > 0.0) {
      sample += spec.noise_sigma * draw_vector(spec.dim);
    }
    result.corpus.data.row(i) = sample.cast<float>().transpose();

    char sid[24], spk[24];
    std::snprintf(sid, sizeof(sid), "s%06lld", static_cast<long long>(i));
    std::snprintf(spk, sizeof(spk), "spk%04d", speaker);
    result.corpus.sample_ids->emplace_back(sid);
    result.corpus.speaker_ids->emplace_back(spk);
  }

  for (size_t a = 0; a < n_attr; ++a) {
    const auto& attr = spec.attributes[a];
    LabelSet set;
    set.positive_label = attr.name;
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& id = (*result.corpus.sample_ids)[static_cast<size_t>(i)];
      set.labels[id] = result.truth.active[a][static_cast<size_t>(i)];
      if (attr.subcomponents.size() == 2) {
        set.strata[id] =
            result.truth.stratum[a][static_cast<size_t>(i)] == 0 ? "sub0" : "sub1";
      }
    }
    result.labels.push_back(std::move(set));
  }
  return result;
}

namespace {

[[noreturn]] void spec_field_error(const std::string& field, const std::string& why) {
  throw SpecError("synth spec field '" + field + "': " + why);
}

template <typename T>
T require_field(const nlohmann::json& j, const std::string& field) {
  if (!j.contains(field)) spec_field_error(field, "missing");
  try {
    return j.at(field).get<T>();
  } catch (const nlohmann::json::exception&) {
    spec_field_error(field, "wrong type");
  }
}

}  // namespace

SynthSpec synth_spec_from_json(const nlohmann::json& j) {
  SynthSpec spec;
  spec.dim = require_field<int>(j, "dim");
  spec.n_samples = require_field<Eigen::Index>(j, "n_samples");
  spec.n_speakers = require_field<int>(j, "n_speakers");
  spec.noise_sigma = require_field<double>(j, "noise_sigma");
  spec.seed = require_field<uint64_t>(j, "seed");
  if (!j.contains("attributes") || !j.at("attributes").is_array()) {
    spec_field_error("attributes", "missing or not an array");
  }
  for (const auto& ja : j.at("attributes")) {
    PlantedAttribute attr;
    attr.name = require_field<std::string>(ja, "name");
    attr.prevalence = require_field<double>(ja, "prevalence");
    attr.strength = require_field<double>(ja, "strength");
    if (ja.contains("n_subcomponents")) {
      attr.n_subcomponents = ja.at("n_subcomponents").get<int>();
    }
    if (ja.contains("subcomponent_mix")) {
      attr.subcomponent_mix = ja.at("subcomponent_mix").get<double>();
    }
    if (ja.contains("stratum_fidelity")) {
      attr.stratum_fidelity = ja.at("stratum_fidelity").get<double>();
    }
    spec.attributes.push_back(std::move(attr));
  }
  spec.validate();
  return spec;
}

nlohmann::json synth_spec_to_json(const SynthSpec& spec) {
  nlohmann::json attrs = nlohmann::json::array();
  for (const auto& attr : spec.attributes) {
    nlohmann::json ja{{"name", attr.name},
                      {"prevalence", attr.prevalence},
                      {"strength", attr.strength},
                      {"n_subcomponents",
                       attr.subcomponents.empty()
                           ? attr.n_subcomponents
                           : static_cast<int>(attr.subcomponents.size())},
                      {"stratum_fidelity", attr.stratum_fidelity}};
    if (attr.subcomponent_mix) ja["subcomponent_mix"] = *attr.subcomponent_mix;
    attrs.push_back(std::move(ja));
  }
  return nlohmann::json{{"dim", spec.dim},
                        {"n_samples", spec.n_samples},
                        {"n_speakers", spec.n_speakers},
                        {"noise_sigma", spec.noise_sigma},
                        {"seed", spec.seed},
                        {"attributes", std::move(attrs)}};
}

nlohmann::json ground_truth_to_json(const SynthResult& result) {
  nlohmann::json attrs;
  for (size_t a = 0; a < result.spec.attributes.size(); ++a) {
    const auto& name = result.spec.attributes[a].name;
    nlohmann::json active = nlohmann::json::array();
    nlohmann::json sub = nlohmann::json::array();
    nlohmann::json stratum = nlohmann::json::array();
    for (size_t i = 0; i < result.truth.active[a].size(); ++i) {
      active.push_back(result.truth.active[a][i] ? 1 : 0);
      sub.push_back(result.truth.subcomponent[a][i]);
      stratum.push_back(result.truth.stratum[a][i]);
    }
    attrs[name] = {{"active", std::move(active)},
                   {"subcomponent", std::move(sub)},
                   {"stratum", std::move(stratum)}};
  }
  return nlohmann::json{{"spec", synth_spec_to_json(result.spec)},
                        {"sample_ids", *result.corpus.sample_ids},
                        {"speaker_ids", *result.corpus.speaker_ids},
                        {"attributes", std::move(attrs)}};
}

}  // namespace latentlens
