#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "fwfm/corpus.h"
#include "fwfm/models.h"

namespace fwfm {

enum class PairStat { kMutualInformation, kLearnedStrength, kRWeights };

// Symmetric n x n matrix of per-field-pair scalars with a zero diagonal.
class FieldPairMatrix {
 public:
  FieldPairMatrix() = default;
  FieldPairMatrix(std::size_t n, PairStat kind) : n_(n), kind_(kind), values_(n * n, 0.0) {}

  std::size_t n() const { return n_; }
  PairStat kind() const { return kind_; }
  double at(std::size_t a, std::size_t b) const { return values_.at(a * n_ + b); }
  // Sets both (a, b) and (b, a). The diagonal stays 0.
  void set(std::size_t a, std::size_t b, double value);

  // Entries (a, b) with a < b, row-major.
  std::vector<double> upper_triangle() const;

  // Field pairs that never co-occurred (entry left at 0).
  const std::vector<std::pair<std::size_t, std::size_t>>& unobserved() const { return unobserved_; }
  void mark_unobserved(std::size_t a, std::size_t b) { unobserved_.emplace_back(a, b); }

  bool operator==(const FieldPairMatrix& other) const { return n_ == other.n_ && values_ == other.values_; }

 private:
  std::size_t n_ = 0;
  PairStat kind_ = PairStat::kMutualInformation;
  std::vector<double> values_;
  std::vector<std::pair<std::size_t, std::size_t>> unobserved_;
};

// Plug-in mutual information (nats) between each field pair's joint feature
// value and the label. Throws UndefinedMetricError on empty or single-label data.
FieldPairMatrix mutual_information(const Dataset& data);

// Co-occurrence-weighted mean of the per-feature-pair interaction magnitude,
// per field pair: |<v_i, v_j>| for FM, |<v_{i,F_l}, v_{j,F_k}>| for FFM and
// |<v_i, v_j> r_{F_k,F_l}| for FwFM. Counts come from train.
FieldPairMatrix learned_strength(const ModelParams& params, const Dataset& train);

// FwFM strength with the r factor dropped: |<v_i, v_j>|.
FieldPairMatrix strength_without_r(const ModelParams& params, const Dataset& train);

// The FwFM r matrix as learned (signed).
FieldPairMatrix r_weights(const ModelParams& params);

FieldPairMatrix abs_values(const FieldPairMatrix& m);

// Pearson correlation over the n(n-1)/2 upper-triangle entries.
// Throws UndefinedMetricError when either side has zero variance.
double pearson(const FieldPairMatrix& a, const FieldPairMatrix& b);
double pearson(const std::vector<double>& a, const std::vector<double>& b);

// CSV with a header row and column of field names.
void emit_heatmap(const FieldPairMatrix& mat, const std::vector<std::string>& field_names, const std::string& path);
std::string heatmap_csv(const FieldPairMatrix& mat, const std::vector<std::string>& field_names);

struct Heatmap {
  std::vector<std::string> field_names;
  FieldPairMatrix matrix;
};
Heatmap read_heatmap(const std::string& path, PairStat kind = PairStat::kMutualInformation);
Heatmap parse_heatmap_csv(const std::string& text, PairStat kind = PairStat::kMutualInformation);

}  // namespace fwfm
