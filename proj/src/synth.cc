#include "fwfm/synth.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "fwfm/errors.h"
#include "fwfm/models.h"
#include "fwfm/random.h"

namespace fwfm {

namespace {

// Cumulative Zipf weights 1 / (j + 1)^s over c categories.
std::vector<double> zipf_cdf(std::size_t c, double s) {
  std::vector<double> cdf(c);
  double total = 0.0;
  for (std::size_t j = 0; j < c; ++j) {
    total += 1.0 / std::pow(static_cast<double>(j + 1), s);
    cdf[j] = total;
  }
  for (double& x : cdf) x /= total;
  return cdf;
}

std::size_t planted_index(const SynthSpec& spec, const FieldSchema& schema, FieldId field, FeatureId id) {
  std::size_t j = 0;
  const auto& tok = schema.token(id);
  if (tok.empty() || !std::all_of(tok.begin(), tok.end(), [](char c) { return c >= '0' && c <= '9'; }))
    throw ContractError("feature '" + tok + "' is not a generated feature");
  j = std::stoul(tok);
  if (j >= spec.features_per_field.at(field)) throw ContractError("generated feature index out of range");
  return spec.feature_offset(field) + j;
}

double dot(const double* a, const double* b, std::size_t k) {
  double s = 0.0;
  for (std::size_t c = 0; c < k; ++c) s += a[c] * b[c];
  return s;
}

}  // namespace

std::size_t SynthSpec::n_features() const {
  return std::accumulate(features_per_field.begin(), features_per_field.end(), std::size_t{0});
}

std::size_t SynthSpec::feature_offset(std::size_t field) const {
  return std::accumulate(features_per_field.begin(), features_per_field.begin() + static_cast<long>(field),
                         std::size_t{0});
}

void SynthSpec::validate() const {
  const std::size_t n = n_fields();
  if (std::any_of(features_per_field.begin(), features_per_field.end(), [](auto c) { return c < 1; }))
    throw ConfigError("every field needs at least one feature");
  if (r_star.n() != n) throw ConfigError("r_star must be n_fields x n_fields");
  if (k < 1) throw ConfigError("k must be >= 1");
  if (v_star.size() != n_features() * k) throw ConfigError("v_star must hold m x k values");
  if (!w_star.empty() && w_star.size() != n_features()) throw ConfigError("w_star must hold m values");
  if (!(label_noise >= 0.0 && label_noise <= 1.0)) throw ConfigError("label_noise must lie in [0, 1]");
  if (!(zipf_s >= 0.0)) throw ConfigError("zipf_s must be >= 0");
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b)
      if (!std::isfinite(r_star.at(a, b)) || r_star.at(a, b) != r_star.at(b, a))
        throw ConfigError("r_star must be finite and symmetric");
}

nlohmann::json SynthSpec::to_json() const {
  const std::size_t n = n_fields();
  std::vector<std::vector<double>> r(n, std::vector<double>(n));
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b) r[a][b] = r_star.at(a, b);
  return {{"format", "fwfm-planted"},
          {"version", 1},
          {"features_per_field", features_per_field},
          {"k", k},
          {"r_star", r},
          {"v_star", v_star},
          {"w_star", w_star},
          {"bias", bias},
          {"n_samples", n_samples},
          {"label_noise", label_noise},
          {"zipf_s", zipf_s},
          {"seed", seed}};
}

SynthSpec SynthSpec::from_json(const nlohmann::json& doc) {
  try {
    SynthSpec spec;
    spec.features_per_field = doc.at("features_per_field").get<std::vector<std::size_t>>();
    spec.k = doc.at("k").get<std::size_t>();
    const auto r = doc.at("r_star").get<std::vector<std::vector<double>>>();
    const std::size_t n = spec.features_per_field.size();
    if (r.size() != n) throw ConfigError("r_star must be n_fields x n_fields");
    spec.r_star = FieldPairMatrix(n, PairStat::kRWeights);
    for (std::size_t a = 0; a < n; ++a) {
      if (r[a].size() != n) throw ConfigError("r_star must be n_fields x n_fields");
      if (r[a][a] != 0.0) throw ConfigError("r_star diagonal must be 0");
      for (std::size_t b = a + 1; b < n; ++b) {
        if (r[a][b] != r[b][a]) throw ConfigError("r_star must be symmetric");
        spec.r_star.set(a, b, r[a][b]);
      }
    }
    spec.v_star = doc.at("v_star").get<std::vector<double>>();
    spec.w_star = doc.value("w_star", std::vector<double>{});
    spec.bias = doc.value("bias", 0.0);
    spec.n_samples = doc.value("n_samples", std::size_t{0});
    spec.label_noise = doc.value("label_noise", 0.0);
    spec.zipf_s = doc.value("zipf_s", 0.0);
    spec.seed = doc.value("seed", std::uint64_t{1});
    spec.validate();
    return spec;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid planted spec: ") + e.what());
  }
}

SynthSpec make_planted_spec(const PlantOptions& opts) {
  if (opts.n_fields < 1 || opts.features_per_field < 1 || opts.k < 1)
    throw ConfigError("planted spec needs >= 1 field, feature and embedding dimension");
  if (opts.levels.empty()) throw ConfigError("planted spec needs at least one strength level");
  if (!(opts.zipf_s >= 0.0)) throw ConfigError("zipf_s must be >= 0");
  SynthSpec spec;
  spec.features_per_field.assign(opts.n_fields, opts.features_per_field);
  spec.k = opts.k;
  spec.bias = opts.bias;
  spec.label_noise = opts.label_noise;
  spec.n_samples = opts.n_samples;
  spec.seed = opts.seed;
  spec.zipf_s = opts.zipf_s;

  Rng rng(mix64(opts.seed));
  const std::size_t c = opts.features_per_field, k = opts.k;
  spec.v_star.resize(spec.n_features() * k);
  for (double& x : spec.v_star) x = uniform_real(rng, -opts.embedding_scale, opts.embedding_scale);
  // Weighted by the sampling marginals, so E[v_j] = 0 within every field.
  std::vector<double> weight(c, 1.0 / static_cast<double>(c));
  if (opts.zipf_s > 0.0) {
    const auto cdf = zipf_cdf(c, opts.zipf_s);
    for (std::size_t j = 0; j < c; ++j) weight[j] = cdf[j] - (j ? cdf[j - 1] : 0.0);
  }
  for (std::size_t f = 0; f < opts.n_fields; ++f) {
    double* base = spec.v_star.data() + f * c * k;
    for (std::size_t d = 0; d < k; ++d) {
      double mean = 0.0;
      for (std::size_t j = 0; j < c; ++j) mean += weight[j] * base[j * k + d];
      if (c > 1)
        for (std::size_t j = 0; j < c; ++j) base[j * k + d] -= mean;
    }
  }

  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t a = 0; a < opts.n_fields; ++a)
    for (std::size_t b = a + 1; b < opts.n_fields; ++b) pairs.emplace_back(a, b);
  shuffle(std::span(pairs), rng);
  spec.r_star = FieldPairMatrix(opts.n_fields, PairStat::kRWeights);
  for (std::size_t p = 0; p < pairs.size(); ++p)
    spec.r_star.set(pairs[p].first, pairs[p].second, opts.levels[p % opts.levels.size()]);
  return spec;
}

Dataset generate(const SynthSpec& spec) {
  spec.validate();
  const std::size_t n = spec.n_fields();
  Dataset data;
  data.role = Role::kTrain;
  data.schema = FieldSchema(n);
  std::vector<std::vector<FeatureId>> ids(n);
  for (std::size_t f = 0; f < n; ++f)
    for (std::size_t j = 0; j < spec.features_per_field[f]; ++j)
      ids[f].push_back(data.schema.intern(static_cast<FieldId>(f), std::to_string(j)));

  std::vector<std::vector<double>> cdfs;
  if (spec.zipf_s > 0.0)
    for (std::size_t f = 0; f < n; ++f) cdfs.push_back(zipf_cdf(spec.features_per_field[f], spec.zipf_s));

  Rng rng(spec.seed);
  std::vector<std::size_t> planted(n);
  data.instances.reserve(spec.n_samples);
  for (std::size_t s = 0; s < spec.n_samples; ++s) {
    Instance inst;
    inst.active.resize(n);
    for (std::size_t f = 0; f < n; ++f) {
      std::size_t j;
      if (cdfs.empty()) {
        j = static_cast<std::size_t>(uniform_index(rng, spec.features_per_field[f]));
      } else {
        const double u = uniform01(rng);
        j = static_cast<std::size_t>(std::upper_bound(cdfs[f].begin(), cdfs[f].end(), u) - cdfs[f].begin());
        j = std::min(j, spec.features_per_field[f] - 1);
      }
      planted[f] = spec.feature_offset(f) + j;
      inst.active[f] = ids[f][j];
      data.schema.add_count(ids[f][j]);
    }
    double phi = spec.bias;
    if (!spec.w_star.empty())
      for (std::size_t f = 0; f < n; ++f) phi += spec.w_star[planted[f]];
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = a + 1; b < n; ++b)
        phi += dot(&spec.v_star[planted[a] * spec.k], &spec.v_star[planted[b] * spec.k], spec.k) *
               spec.r_star.at(a, b);
    inst.label = bernoulli(rng, sigmoid(phi)) ? 1 : -1;
    if (spec.label_noise > 0.0 && bernoulli(rng, spec.label_noise)) inst.label = -inst.label;
    data.instances.push_back(std::move(inst));
  }
  return data;
}

double planted_score(const SynthSpec& spec, const Dataset& data, const Instance& inst) {
  const std::size_t n = spec.n_fields();
  if (inst.active.size() != n) throw ContractError("instance does not match the planted spec");
  std::vector<std::size_t> planted(n);
  for (std::size_t f = 0; f < n; ++f)
    planted[f] = planted_index(spec, data.schema, static_cast<FieldId>(f), inst.active[f]);
  double phi = spec.bias;
  if (!spec.w_star.empty())
    for (std::size_t f = 0; f < n; ++f) phi += spec.w_star[planted[f]];
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = a + 1; b < n; ++b)
      phi += dot(&spec.v_star[planted[a] * spec.k], &spec.v_star[planted[b] * spec.k], spec.k) *
             spec.r_star.at(a, b);
  return phi;
}

void write_planted_sidecar(const SynthSpec& spec, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path + " for writing");
  out << spec.to_json().dump(1) << '\n';
  if (!out) throw Error("failed writing " + path);
}

}  // namespace fwfm
