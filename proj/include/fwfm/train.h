#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fwfm/corpus.h"
#include "fwfm/models.h"
#include "json.hpp"

namespace fwfm {

enum class OptimizerKind { kSgd, kAdam };

// Lazy applies the L2 term to a row only when an instance touches it, scaled
// by the steps elapsed since its last update. Eager regularises every
// parameter on every step; it exists as the reference for the lazy path.
enum class L2Mode { kLazy, kEager };

struct AdamSettings {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct TrainConfig {
  double eta = 1e-4;
  double lambda = 1e-5;
  std::size_t epochs = 15;
  std::size_t batch_size = 1;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  AdamSettings adam;
  std::uint64_t seed = 1;
  bool select_best_on_validation = true;
  L2Mode l2_mode = L2Mode::kLazy;

  // Model shape.
  std::uint64_t k = 10;
  std::uint64_t hash_space = kDefaultPoly2HashSpace;
  std::uint64_t ffm_hash_space = 0;

  // Skip the per-epoch training-set AUC pass.
  bool skip_train_auc = false;

  // Throws ConfigError when a field is out of range.
  void validate() const;
  ModelDims dims_for(const FieldSchema& schema) const;
};

nlohmann::json to_json(const TrainConfig& cfg);
// Overlays the keys present in doc onto base. Unknown keys are a ConfigError.
TrainConfig config_from_json(const nlohmann::json& doc, const TrainConfig& base = {});

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_auc = 0.0;  // NaN when skipped or undefined
  double validation_auc = 0.0;  // NaN when undefined
  double mean_train_loss = 0.0;
  double seconds = 0.0;
};

struct TrainReport {
  ModelKind kind = ModelKind::kLR;
  TrainConfig config;
  std::uint64_t parameter_count = 0;
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;  // 1-based index into epochs

  const EpochRecord& best() const { return epochs.at(best_epoch - 1); }
  nlohmann::json to_json() const;
  std::string to_csv() const;
};

struct TrainResult {
  ModelParams params;
  TrainReport report;
};

// Applies optimiser steps to a parameter set it does not own.
class Optimizer {
 public:
  Optimizer(ModelParams& params, const TrainConfig& cfg);

  // One update from the mean gradient of the batch. Returns the summed loss.
  // Throws DivergedError on a non-finite loss.
  double step(std::span<const Instance* const> batch);
  double step(const Instance& inst) {
    const Instance* one[] = {&inst};
    return step(one);
  }

  // Applies pending lazy decay so params equal their eagerly regularised
  // values (plain SGD only; Adam's lazy term is folded into the next touch).
  void flush();

  std::uint64_t steps() const { return t_; }

 private:
  void catch_up(const Instance& inst);
  void catch_up(std::size_t block, std::size_t row);
  void update_row(std::size_t block, std::size_t row, std::span<const double> g);
  void update_scalar(double& theta, double& m, double& v, double g);

  ModelParams& params_;
  TrainConfig cfg_;
  std::uint64_t t_ = 0;
  double beta1_pow_ = 1.0, beta2_pow_ = 1.0;
  double w0_m_ = 0.0, w0_v_ = 0.0;
  std::array<std::vector<double>, kNumBlocks> m_, v_;
  std::array<std::vector<std::uint64_t>, kNumBlocks> last_;
  LossAndGradient scratch_;
  SparseGradient batch_grad_;
};

// Minimises the L2-regularised logistic loss for cfg.epochs passes in a seeded
// shuffled order. Returns the best-validation snapshot when
// select_best_on_validation, otherwise the final one.
TrainResult train(ModelKind kind, const Dataset& train_data, const Dataset& valid_data, const TrainConfig& cfg);
// Same, starting from the given parameters.
TrainResult train_from(ModelParams init, const Dataset& train_data, const Dataset& valid_data,
                       const TrainConfig& cfg);

struct SweepRow {
  ModelKind kind = ModelKind::kLR;
  TrainConfig config;
  std::uint64_t parameter_count = 0;
  double train_auc = 0.0;  // at the best epoch
  double validation_auc = 0.0;
  double seconds = 0.0;
  std::optional<std::string> error;
};

// Trains every config independently; a failing cell records its error and
// the sweep continues.
std::vector<SweepRow> sweep(ModelKind kind, std::span<const TrainConfig> grid, const Dataset& train_data,
                            const Dataset& valid_data);
std::string sweep_to_csv(std::span<const SweepRow> rows);

}  // namespace fwfm
