#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "fwfm/corpus.h"
#include "fwfm/fieldstats.h"
#include "json.hpp"

namespace fwfm {

// Ground truth for a synthetic corpus labelled by an FwFM_LW scorer.
struct SynthSpec {
  std::vector<std::size_t> features_per_field;
  std::size_t k = 4;
  FieldPairMatrix r_star;          // planted field-pair strengths
  std::vector<double> v_star;      // planted embeddings, m x k, features grouped by field
  std::vector<double> w_star;      // planted linear weights, empty means 0
  double bias = 0.0;
  std::size_t n_samples = 0;
  double label_noise = 0.0;        // probability of flipping a label
  double zipf_s = 0.0;             // 0 gives uniform feature marginals
  std::uint64_t seed = 1;

  std::size_t n_fields() const { return features_per_field.size(); }
  std::size_t n_features() const;  // sum of features_per_field
  // Offset of field f's first feature in v_star / w_star.
  std::size_t feature_offset(std::size_t field) const;

  // Throws ConfigError when shapes or ranges are inconsistent.
  void validate() const;
  nlohmann::json to_json() const;
  static SynthSpec from_json(const nlohmann::json& doc);
};

struct PlantOptions {
  std::size_t n_fields = 8;
  std::size_t features_per_field = 16;
  std::size_t k = 4;
  // Field pairs are spread evenly over these strengths.
  std::vector<double> levels = {0.0, 0.5, 1.5};
  double embedding_scale = 1.0;
  double bias = 0.0;
  double label_noise = 0.0;
  double zipf_s = 0.0;
  std::size_t n_samples = 100000;
  std::uint64_t seed = 1;
};

// Random planted spec: embeddings uniform in [-scale, scale] and centred per
// field under the feature marginals (so no feature carries a marginal
// effect), r* drawn from the levels.
SynthSpec make_planted_spec(const PlantOptions& opts);

// One feature per field, labels drawn from sigmoid of the planted score and
// flipped with probability label_noise. Feature j of field f has token "j".
Dataset generate(const SynthSpec& spec);

// Planted score of a generated instance.
double planted_score(const SynthSpec& spec, const Dataset& data, const Instance& inst);

void write_planted_sidecar(const SynthSpec& spec, const std::string& path);

}  // namespace fwfm
