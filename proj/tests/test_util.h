#pragma once

// Helpers shared by the unit and acceptance suites: random generators and the
// finite-difference oracle. Everything here is independent of the analytic
// gradient code it is used to check.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "fwfm/corpus.h"
#include "fwfm/models.h"
#include "fwfm/random.h"

namespace fwfm::testing {

// n fields with `per_field` named features each (plus the NULLs).
inline FieldSchema make_schema(std::size_t n_fields, std::size_t per_field) {
  FieldSchema schema(n_fields);
  for (FieldId f = 0; f < n_fields; ++f)
    for (std::size_t j = 0; j < per_field; ++j) schema.intern(f, "t" + std::to_string(j));
  return schema;
}

// One uniformly chosen feature (NULL included) per field.
inline Instance random_instance(const FieldSchema& schema, Rng& rng) {
  std::vector<std::vector<FeatureId>> by_field(schema.n_fields());
  for (FeatureId id = 0; id < schema.n_features(); ++id) by_field[schema.field_of(id)].push_back(id);
  Instance inst;
  inst.label = bernoulli(rng, 0.5) ? 1 : -1;
  for (const auto& ids : by_field) inst.active.push_back(ids[uniform_index(rng, ids.size())]);
  return inst;
}

inline void randomize(ModelParams& p, Rng& rng, double scale) {
  p.w0 = uniform_real(rng, -scale, scale);
  for (auto& t : p.blocks)
    for (double& x : t.values) x = uniform_real(rng, -scale, scale);
}

inline ModelParams random_params(ModelKind kind, const ModelDims& dims, Rng& rng, double scale = 0.7) {
  ModelParams p = make_params(kind, dims);
  randomize(p, rng, scale);
  return p;
}

inline double loss_of(const ModelParams& p, const Instance& inst) {
  const double phi = predict_raw(p, inst);
  const double z = -(inst.label > 0 ? 1.0 : -1.0) * phi;
  return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

struct FdResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
};

// Central differences over every allocated scalar (bias included), compared
// with the sparse analytic gradient scattered to dense form. Relative error
// is |a - f| / max(|a|, |f|, floor).
inline FdResult finite_difference_check(ModelParams p, const Instance& inst, const SparseGradient& grad,
                                        double eps = 1e-5, double floor = 1e-4) {
  FdResult res;
  auto compare = [&](double analytic, double numeric) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
    res.max_rel_error = std::max(res.max_rel_error, std::abs(analytic - numeric) / denom);
    ++res.checked;
  };
  auto central = [&](double& theta) {
    const double saved = theta;
    theta = saved + eps;
    const double up = loss_of(p, inst);
    theta = saved - eps;
    const double down = loss_of(p, inst);
    theta = saved;
    return (up - down) / (2 * eps);
  };

  compare(grad.d_w0, central(p.w0));
  for (std::size_t b = 0; b < kNumBlocks; ++b) {
    auto& table = p.blocks[b];
    std::vector<double> dense(table.values.size(), 0.0);
    const auto& rows = grad.blocks[b];
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (std::size_t c = 0; c < rows.width; ++c) dense.at(rows.keys[i] * table.width + c) += rows.row(i)[c];
    for (std::size_t j = 0; j < table.values.size(); ++j) compare(dense[j], central(table.values[j]));
  }
  return res;
}

}  // namespace fwfm::testing
