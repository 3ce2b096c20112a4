#include "fwfm/models.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fwfm/errors.h"
#include "fwfm/random.h"

namespace fwfm {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

std::uint64_t n_pairs(std::uint64_t n) { return n * (n - (n ? 1 : 0)) / 2; }

void check_instance(const ModelParams& params, const Instance& inst) {
  if (inst.active.size() != params.dims.n_fields)
    throw ContractError("instance has " + std::to_string(inst.active.size()) + " fields, model expects " +
                        std::to_string(params.dims.n_fields));
  for (FeatureId id : inst.active)
    if (id >= params.dims.n_features)
      throw ContractError("feature id " + std::to_string(id) + " out of range for model with " +
                          std::to_string(params.dims.n_features) + " features");
}

// Score shared by predict_raw and gradient so both use one summation order.
// FM and FwFM run through the same loop; with r == 1 the products are exact,
// which keeps FwFM_LW(r = 1) bitwise equal to FM.
double score(const ModelParams& p, const Instance& inst) {
  const auto& a = inst.active;
  const std::size_t n = a.size();
  double phi = p.w0;
  switch (p.kind) {
    case ModelKind::kLR:
    case ModelKind::kPoly2:
    case ModelKind::kFM:
    case ModelKind::kFFM:
    case ModelKind::kFwFM_LW:
      for (std::size_t k = 0; k < n; ++k) phi += p.w().values[a[k]];
      break;
    case ModelKind::kFwFM_FeLV:
      for (std::size_t k = 0; k < n; ++k) phi += dot(p.v().row(a[k]), p.wv_feat().row(a[k]));
      break;
    case ModelKind::kFwFM_FiLV:
      for (std::size_t k = 0; k < n; ++k) phi += dot(p.v().row(a[k]), p.wv_field().row(k));
      break;
  }
  switch (p.kind) {
    case ModelKind::kLR:
      break;
    case ModelKind::kPoly2:
      for (std::size_t k = 0; k < n; ++k)
        for (std::size_t l = k + 1; l < n; ++l)
          phi += p.w_hash().values[poly2_hash(a[k], a[l], p.dims.hash_space)];
      break;
    case ModelKind::kFFM:
      for (std::size_t k = 0; k < n; ++k)
        for (std::size_t l = k + 1; l < n; ++l)
          phi += dot(p.v_field().row(ffm_row(p, a[k], k, l)), p.v_field().row(ffm_row(p, a[l], l, k)));
      break;
    case ModelKind::kFM:
    case ModelKind::kFwFM_LW:
    case ModelKind::kFwFM_FeLV:
    case ModelKind::kFwFM_FiLV: {
      const bool weighted = is_fwfm(p.kind);
      const auto& r = p.block(Block::kFieldPair).values;
      for (std::size_t k = 0; k < n; ++k) {
        for (std::size_t l = k + 1; l < n; ++l) {
          double term = dot(p.v().row(a[k]), p.v().row(a[l]));
          if (weighted) term *= r[pair_index(k, l, n)];
          phi += term;
        }
      }
      break;
    }
  }
  return phi;
}

}  // namespace

std::string_view model_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::kLR:
      return "lr";
    case ModelKind::kPoly2:
      return "poly2";
    case ModelKind::kFM:
      return "fm";
    case ModelKind::kFFM:
      return "ffm";
    case ModelKind::kFwFM_LW:
      return "fwfm-lw";
    case ModelKind::kFwFM_FeLV:
      return "fwfm-felv";
    case ModelKind::kFwFM_FiLV:
      return "fwfm-filv";
  }
  return "?";
}

std::optional<ModelKind> parse_model_kind(std::string_view name) {
  for (auto kind : kAllModelKinds)
    if (model_name(kind) == name) return kind;
  return std::nullopt;
}

std::string_view block_name(Block block) {
  switch (block) {
    case Block::kLinear:
      return "w";
    case Block::kPairHash:
      return "w_hash";
    case Block::kEmbedding:
      return "v";
    case Block::kFieldEmbedding:
      return "v_field";
    case Block::kFieldPair:
      return "r";
    case Block::kFeatureLinear:
      return "wv_feat";
    case Block::kFieldLinear:
      return "wv_field";
  }
  return "?";
}

double ModelParams::r(std::size_t a, std::size_t b) const {
  if (a == b) return 0.0;
  const auto& table = block(Block::kFieldPair);
  if (table.values.empty()) throw ContractError("model has no field-pair weights");
  return table.values.at(pair_index(a, b, dims.n_fields));
}

void ModelParams::set_r(std::size_t a, std::size_t b, double value) {
  if (a == b) throw ContractError("the field-pair weight diagonal is fixed at 0");
  block(Block::kFieldPair).values.at(pair_index(a, b, dims.n_fields)) = value;
}

ModelParams make_params(ModelKind kind, ModelDims dims) {
  const bool embeds = has_embeddings(kind) || kind == ModelKind::kFFM;
  if (embeds && dims.k == 0) throw ConfigError("embedding dimension K must be >= 1");
  if (!embeds) dims.k = 0;
  if (kind == ModelKind::kPoly2 && dims.hash_space == 0) throw ConfigError("Poly2 hash space must be >= 1");
  if (kind != ModelKind::kPoly2) dims.hash_space = 0;
  if (kind != ModelKind::kFFM) dims.ffm_hash_space = 0;

  ModelParams p;
  p.kind = kind;
  p.dims = dims;
  const std::uint64_t m = dims.n_features, n = dims.n_fields, k = dims.k;
  auto alloc = [&](Block b, std::uint64_t rows, std::uint64_t width) {
    auto& t = p.block(b);
    t.width = width;
    t.values.assign(rows * width, 0.0);
  };
  switch (kind) {
    case ModelKind::kLR:
      alloc(Block::kLinear, m, 1);
      break;
    case ModelKind::kPoly2:
      alloc(Block::kLinear, m, 1);
      alloc(Block::kPairHash, dims.hash_space, 1);
      break;
    case ModelKind::kFM:
      alloc(Block::kLinear, m, 1);
      alloc(Block::kEmbedding, m, k);
      break;
    case ModelKind::kFFM: {
      const std::uint64_t rows = dims.ffm_hash_space ? dims.ffm_hash_space : m;
      alloc(Block::kLinear, m, 1);
      alloc(Block::kFieldEmbedding, rows * (n ? n - 1 : 0), k);
      break;
    }
    case ModelKind::kFwFM_LW:
      alloc(Block::kLinear, m, 1);
      alloc(Block::kEmbedding, m, k);
      alloc(Block::kFieldPair, n_pairs(n), 1);
      break;
    case ModelKind::kFwFM_FeLV:
      alloc(Block::kEmbedding, m, k);
      alloc(Block::kFeatureLinear, m, k);
      alloc(Block::kFieldPair, n_pairs(n), 1);
      break;
    case ModelKind::kFwFM_FiLV:
      alloc(Block::kEmbedding, m, k);
      alloc(Block::kFieldLinear, n, k);
      alloc(Block::kFieldPair, n_pairs(n), 1);
      break;
  }
  return p;
}

ModelParams init_params(ModelKind kind, ModelDims dims, std::uint64_t seed) {
  ModelParams p = make_params(kind, dims);
  Rng rng(seed);
  if (p.dims.k > 0) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(p.dims.k));
    for (Block b : {Block::kEmbedding, Block::kFieldEmbedding})
      for (double& x : p.block(b).values) x = uniform_real(rng, -scale, scale);
  }
  std::fill(p.block(Block::kFieldPair).values.begin(), p.block(Block::kFieldPair).values.end(), 1.0);
  return p;
}

std::uint64_t poly2_hash(FeatureId i, FeatureId j, std::uint64_t hash_space) {
  const std::uint64_t lo = std::min(i, j), hi = std::max(i, j);
  return mix64((lo << 32) | hi) % hash_space;
}

std::uint64_t ffm_hashed_lookup(FeatureId i, std::uint64_t ffm_hash_space) {
  return ffm_hash_space ? i % ffm_hash_space : i;
}

std::size_t ffm_row(const ModelParams& params, FeatureId i, FieldId field, FieldId target) {
  const std::uint64_t n = params.dims.n_fields;
  const std::uint64_t slot = target < field ? target : target - 1;
  return static_cast<std::size_t>(ffm_hashed_lookup(i, params.dims.ffm_hash_space) * (n - 1) + slot);
}

double predict_raw(const ModelParams& params, const Instance& inst) {
  check_instance(params, inst);
  return score(params, inst);
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus(double x) {
  if (x > 0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

double predict_proba(const ModelParams& params, const Instance& inst) {
  return sigmoid(predict_raw(params, inst));
}

void SparseRows::add(std::uint64_t key, std::span<const double> g, double scale) {
  keys.push_back(key);
  for (double x : g) values.push_back(scale * x);
}

void SparseRows::add(std::uint64_t key, double g) {
  keys.push_back(key);
  values.push_back(g);
}

void SparseRows::coalesce() {
  const std::size_t n = keys.size();
  if (n < 2) return;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return keys[a] < keys[b]; });
  std::vector<std::uint64_t> out_keys;
  std::vector<double> out_values;
  out_keys.reserve(n);
  out_values.reserve(values.size());
  for (std::size_t idx : order) {
    const auto src = std::span<const double>(values).subspan(idx * width, width);
    if (!out_keys.empty() && out_keys.back() == keys[idx]) {
      double* dst = out_values.data() + out_values.size() - width;
      for (std::size_t c = 0; c < width; ++c) dst[c] += src[c];
    } else {
      out_keys.push_back(keys[idx]);
      out_values.insert(out_values.end(), src.begin(), src.end());
    }
  }
  keys = std::move(out_keys);
  values = std::move(out_values);
}

std::optional<std::span<const double>> SparseRows::find(std::uint64_t key) const {
  auto it = std::lower_bound(keys.begin(), keys.end(), key);
  if (it == keys.end() || *it != key) return std::nullopt;
  return row(static_cast<std::size_t>(it - keys.begin()));
}

void SparseGradient::reset(const ModelParams& params) {
  d_w0 = 0.0;
  for (std::size_t b = 0; b < kNumBlocks; ++b) {
    blocks[b].clear();
    blocks[b].width = params.blocks[b].width;
  }
}

void SparseGradient::coalesce() {
  for (auto& rows : blocks) rows.coalesce();
}

void gradient(const ModelParams& p, const Instance& inst, LossAndGradient& out) {
  check_instance(p, inst);
  const double phi = score(p, inst);
  const double y = inst.label > 0 ? 1.0 : -1.0;
  out.raw = phi;
  out.loss = softplus(-y * phi);
  const double g = -y * sigmoid(-y * phi);

  SparseGradient& grad = out.grad;
  grad.reset(p);
  grad.d_w0 = g;

  const auto& a = inst.active;
  const std::size_t n = a.size();
  const std::size_t k_dim = p.dims.k;

  if (!p.w().values.empty())
    for (std::size_t k = 0; k < n; ++k) grad.block(Block::kLinear).add(a[k], g);

  switch (p.kind) {
    case ModelKind::kLR:
      break;
    case ModelKind::kPoly2:
      for (std::size_t k = 0; k < n; ++k)
        for (std::size_t l = k + 1; l < n; ++l)
          grad.block(Block::kPairHash).add(poly2_hash(a[k], a[l], p.dims.hash_space), g);
      break;
    case ModelKind::kFFM: {
      auto& rows = grad.block(Block::kFieldEmbedding);
      for (std::size_t k = 0; k < n; ++k) {
        for (std::size_t l = k + 1; l < n; ++l) {
          const auto rk = ffm_row(p, a[k], k, l), rl = ffm_row(p, a[l], l, k);
          rows.add(rk, p.v_field().row(rl), g);
          rows.add(rl, p.v_field().row(rk), g);
        }
      }
      break;
    }
    case ModelKind::kFM:
    case ModelKind::kFwFM_LW:
    case ModelKind::kFwFM_FeLV:
    case ModelKind::kFwFM_FiLV: {
      const bool weighted = is_fwfm(p.kind);
      const auto& r = p.block(Block::kFieldPair).values;
      auto& dv = grad.block(Block::kEmbedding);
      std::vector<double> acc(k_dim);
      for (std::size_t k = 0; k < n; ++k) {
        std::fill(acc.begin(), acc.end(), 0.0);
        for (std::size_t l = 0; l < n; ++l) {
          if (l == k) continue;
          const double weight = weighted ? r[pair_index(k, l, n)] : 1.0;
          const auto vl = p.v().row(a[l]);
          for (std::size_t c = 0; c < k_dim; ++c) acc[c] += weight * vl[c];
        }
        if (p.kind == ModelKind::kFwFM_FeLV) {
          const auto wv = p.wv_feat().row(a[k]);
          for (std::size_t c = 0; c < k_dim; ++c) acc[c] += wv[c];
        } else if (p.kind == ModelKind::kFwFM_FiLV) {
          const auto wv = p.wv_field().row(k);
          for (std::size_t c = 0; c < k_dim; ++c) acc[c] += wv[c];
        }
        dv.add(a[k], acc, g);
      }
      if (weighted) {
        auto& dr = grad.block(Block::kFieldPair);
        for (std::size_t k = 0; k < n; ++k)
          for (std::size_t l = k + 1; l < n; ++l)
            dr.add(pair_index(k, l, n), g * dot(p.v().row(a[k]), p.v().row(a[l])));
      }
      if (p.kind == ModelKind::kFwFM_FeLV) {
        for (std::size_t k = 0; k < n; ++k) grad.block(Block::kFeatureLinear).add(a[k], p.v().row(a[k]), g);
      } else if (p.kind == ModelKind::kFwFM_FiLV) {
        for (std::size_t k = 0; k < n; ++k) grad.block(Block::kFieldLinear).add(k, p.v().row(a[k]), g);
      }
      break;
    }
  }
  grad.coalesce();
}

LossAndGradient gradient(const ModelParams& params, const Instance& inst) {
  LossAndGradient out;
  gradient(params, inst, out);
  return out;
}

std::uint64_t parameter_count(ModelKind kind, const ModelDims& dims) {
  const std::uint64_t m = dims.n_features, n = dims.n_fields, k = dims.k;
  switch (kind) {
    case ModelKind::kLR:
      return m;
    case ModelKind::kPoly2:
      return m + dims.hash_space;
    case ModelKind::kFM:
      return m + m * k;
    case ModelKind::kFFM: {
      const std::uint64_t rows = dims.ffm_hash_space ? dims.ffm_hash_space : m;
      return m + rows * (n ? n - 1 : 0) * k;
    }
    case ModelKind::kFwFM_LW:
      return m + m * k + n_pairs(n);
    case ModelKind::kFwFM_FeLV:
      return m * k + m * k + n_pairs(n);
    case ModelKind::kFwFM_FiLV:
      return n * k + m * k + n_pairs(n);
  }
  return 0;
}

std::uint64_t parameter_count(const ModelParams& params) {
  std::uint64_t total = 0;
  for (const auto& t : params.blocks) total += t.values.size();
  return total;
}

}  // namespace fwfm
