#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fwfm/corpus.h"

namespace fwfm {

enum class ModelKind { kLR, kPoly2, kFM, kFFM, kFwFM_LW, kFwFM_FeLV, kFwFM_FiLV };

inline constexpr std::array<ModelKind, 7> kAllModelKinds = {
    ModelKind::kLR,      ModelKind::kPoly2,     ModelKind::kFM,       ModelKind::kFFM,
    ModelKind::kFwFM_LW, ModelKind::kFwFM_FeLV, ModelKind::kFwFM_FiLV};

// CLI spelling: lr, poly2, fm, ffm, fwfm-lw, fwfm-felv, fwfm-filv.
std::string_view model_name(ModelKind kind);
std::optional<ModelKind> parse_model_kind(std::string_view name);

constexpr bool is_fwfm(ModelKind kind) {
  return kind == ModelKind::kFwFM_LW || kind == ModelKind::kFwFM_FeLV || kind == ModelKind::kFwFM_FiLV;
}
constexpr bool has_embeddings(ModelKind kind) { return kind == ModelKind::kFM || is_fwfm(kind); }

inline constexpr std::uint64_t kDefaultPoly2HashSpace = 10'000'000;

struct ModelDims {
  std::uint64_t n_features = 0;  // m
  std::uint64_t n_fields = 0;    // n
  std::uint64_t k = 0;           // embedding size (FM, FFM, FwFM)
  std::uint64_t hash_space = 0;  // Poly2 pair space H
  std::uint64_t ffm_hash_space = 0;  // rows of the hashed FFM table; 0 disables hashing

  bool operator==(const ModelDims&) const = default;
};

// The learnable tables. Each is a flat row-major block of `width`-sized rows.
enum class Block : std::size_t {
  kLinear,         // w: m x 1
  kPairHash,       // Poly2 w_h: H x 1
  kEmbedding,      // v: m x K
  kFieldEmbedding, // FFM v_{i,F}: rows x (n-1), K each
  kFieldPair,      // FwFM r: packed upper triangle, n(n-1)/2 x 1
  kFeatureLinear,  // FeLV w_i vectors: m x K
  kFieldLinear,    // FiLV w_F vectors: n x K
};
inline constexpr std::size_t kNumBlocks = 7;
std::string_view block_name(Block block);

struct ParamTable {
  std::size_t width = 1;
  std::vector<double> values;

  std::size_t rows() const { return width ? values.size() / width : 0; }
  std::span<double> row(std::size_t i) { return std::span(values).subspan(i * width, width); }
  std::span<const double> row(std::size_t i) const { return std::span(values).subspan(i * width, width); }
  bool operator==(const ParamTable&) const = default;
};

// Index of the unordered field pair {a, b}, a != b, in the packed upper triangle.
constexpr std::size_t pair_index(std::size_t a, std::size_t b, std::size_t n) {
  if (a > b) std::swap(a, b);
  return a * n - a * (a + 1) / 2 + (b - a - 1);
}

// Parameters of any supported model; only the blocks the kind uses are allocated.
struct ModelParams {
  ModelKind kind = ModelKind::kLR;
  ModelDims dims;
  double w0 = 0.0;
  std::array<ParamTable, kNumBlocks> blocks;

  ParamTable& block(Block b) { return blocks[static_cast<std::size_t>(b)]; }
  const ParamTable& block(Block b) const { return blocks[static_cast<std::size_t>(b)]; }
  ParamTable& w() { return block(Block::kLinear); }
  const ParamTable& w() const { return block(Block::kLinear); }
  ParamTable& w_hash() { return block(Block::kPairHash); }
  const ParamTable& w_hash() const { return block(Block::kPairHash); }
  ParamTable& v() { return block(Block::kEmbedding); }
  const ParamTable& v() const { return block(Block::kEmbedding); }
  ParamTable& v_field() { return block(Block::kFieldEmbedding); }
  const ParamTable& v_field() const { return block(Block::kFieldEmbedding); }
  ParamTable& wv_feat() { return block(Block::kFeatureLinear); }
  const ParamTable& wv_feat() const { return block(Block::kFeatureLinear); }
  ParamTable& wv_field() { return block(Block::kFieldLinear); }
  const ParamTable& wv_field() const { return block(Block::kFieldLinear); }

  // Field-pair weight r_{a,b}; zero on the diagonal.
  double r(std::size_t a, std::size_t b) const;
  void set_r(std::size_t a, std::size_t b, double value);

  bool operator==(const ModelParams&) const = default;
};

// Allocates zeroed parameters for kind. Throws ConfigError on inconsistent dims.
ModelParams make_params(ModelKind kind, ModelDims dims);

// make_params plus seeded initialisation: embeddings uniform in
// [-1/sqrt(K), 1/sqrt(K)], r = 1 off the diagonal, everything else 0.
ModelParams init_params(ModelKind kind, ModelDims dims, std::uint64_t seed);

// Symmetric 64-bit mix of (min(i,j), max(i,j)) reduced mod H.
std::uint64_t poly2_hash(FeatureId i, FeatureId j, std::uint64_t hash_space);

// Row of the FFM table used by feature i; identity when hashing is off,
// i mod H_ffm otherwise.
std::uint64_t ffm_hashed_lookup(FeatureId i, std::uint64_t ffm_hash_space);

// Flat row of v_{i,target} for feature i of field `field`.
std::size_t ffm_row(const ModelParams& params, FeatureId i, FieldId field, FieldId target);

// Un-squashed score. Throws ContractError on out-of-range features.
double predict_raw(const ModelParams& params, const Instance& inst);
// 1 / (1 + exp(-predict_raw)).
double predict_proba(const ModelParams& params, const Instance& inst);

double sigmoid(double x);
// log(1 + exp(x)) without overflow.
double softplus(double x);

// Sparse rows of one block. Keys may repeat until coalesce() is called.
struct SparseRows {
  std::size_t width = 1;
  std::vector<std::uint64_t> keys;
  std::vector<double> values;

  std::size_t size() const { return keys.size(); }
  bool empty() const { return keys.empty(); }
  std::span<double> row(std::size_t i) { return std::span(values).subspan(i * width, width); }
  std::span<const double> row(std::size_t i) const { return std::span(values).subspan(i * width, width); }
  // Appends scale * g as a new entry for key.
  void add(std::uint64_t key, std::span<const double> g, double scale = 1.0);
  void add(std::uint64_t key, double g);
  // Sorts by key and sums duplicates.
  void coalesce();
  void clear() {
    keys.clear();
    values.clear();
  }
  // Value of key after coalesce(), or nullopt.
  std::optional<std::span<const double>> find(std::uint64_t key) const;
};

// d loss / d theta for the parameters one instance touches.
struct SparseGradient {
  double d_w0 = 0.0;
  std::array<SparseRows, kNumBlocks> blocks;

  SparseRows& block(Block b) { return blocks[static_cast<std::size_t>(b)]; }
  const SparseRows& block(Block b) const { return blocks[static_cast<std::size_t>(b)]; }
  const SparseRows& d_w() const { return block(Block::kLinear); }
  const SparseRows& d_w_hash() const { return block(Block::kPairHash); }
  const SparseRows& d_v() const { return block(Block::kEmbedding); }
  const SparseRows& d_v_field() const { return block(Block::kFieldEmbedding); }
  const SparseRows& d_r() const { return block(Block::kFieldPair); }
  const SparseRows& d_wv_feat() const { return block(Block::kFeatureLinear); }
  const SparseRows& d_wv_field() const { return block(Block::kFieldLinear); }

  void reset(const ModelParams& params);
  void coalesce();
};

struct LossAndGradient {
  double loss = 0.0;
  double raw = 0.0;
  SparseGradient grad;
};

// Logistic loss log(1 + exp(-y * phi)) and its coalesced sparse gradient.
// Regularisation is left to the optimiser.
LossAndGradient gradient(const ModelParams& params, const Instance& inst);
// Same, reusing out's buffers.
void gradient(const ModelParams& params, const Instance& inst, LossAndGradient& out);

// Closed-form model size (bias excluded). Counts follow the model-complexity
// table; hashed FFM uses H_ffm rows instead of m.
std::uint64_t parameter_count(ModelKind kind, const ModelDims& dims);
// Scalars physically allocated in params (bias excluded).
std::uint64_t parameter_count(const ModelParams& params);

// Versioned little-endian binary snapshot; round-trips bit-exactly.
void save_snapshot(const ModelParams& params, const std::string& path);
ModelParams load_snapshot(const std::string& path);
std::string serialize_snapshot(const ModelParams& params);
ModelParams deserialize_snapshot(std::string_view bytes);

}  // namespace fwfm
