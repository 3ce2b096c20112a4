#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "fwfm/corpus.h"
#include "fwfm/models.h"

namespace fwfm {

// Area under the ROC curve as the Mann-Whitney statistic: the fraction of
// (positive, negative) pairs ranked correctly, ties counting one half.
// O(N log N). Labels are +1 / -1. Throws UndefinedMetricError unless both
// classes are present.
double auc(std::span<const double> scores, std::span<const int> labels);

// Mean negative log-likelihood with probabilities clamped to [1e-15, 1 - 1e-15].
double logloss(std::span<const double> scores, std::span<const int> labels);

struct Metrics {
  double auc = 0.0;
  double logloss = 0.0;
  std::size_t n = 0;
};

std::vector<double> predict_all(const ModelParams& params, const Dataset& data);
std::vector<int> labels_of(const Dataset& data);

Metrics evaluate(const ModelParams& params, const Dataset& data);

}  // namespace fwfm
