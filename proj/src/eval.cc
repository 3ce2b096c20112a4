#include "fwfm/eval.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fwfm/errors.h"

namespace fwfm {

double auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw ContractError("scores and labels differ in length");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] < scores[b]; });

  // Sum of 1-based ranks of the positives, tied groups sharing their mean rank.
  double positive_rank_sum = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double mean_rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t t = i; t < j; ++t) {
      if (labels[order[t]] > 0) {
        positive_rank_sum += mean_rank;
        ++n_pos;
      }
    }
    i = j;
  }
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) throw UndefinedMetricError("AUC needs at least one positive and one negative");
  const double np = static_cast<double>(n_pos), nn = static_cast<double>(n_neg);
  return (positive_rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

double logloss(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw ContractError("scores and labels differ in length");
  if (scores.empty()) throw UndefinedMetricError("logloss of an empty set");
  constexpr double kEps = 1e-15;
  double total = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const double p = std::clamp(scores[i], kEps, 1.0 - kEps);
    total -= labels[i] > 0 ? std::log(p) : std::log1p(-p);
  }
  return total / static_cast<double>(scores.size());
}

std::vector<double> predict_all(const ModelParams& params, const Dataset& data) {
  std::vector<double> scores;
  scores.reserve(data.size());
  for (const auto& inst : data.instances) scores.push_back(predict_proba(params, inst));
  return scores;
}

std::vector<int> labels_of(const Dataset& data) {
  std::vector<int> labels;
  labels.reserve(data.size());
  for (const auto& inst : data.instances) labels.push_back(inst.label);
  return labels;
}

Metrics evaluate(const ModelParams& params, const Dataset& data) {
  if (data.schema.n_features() != params.dims.n_features || data.schema.n_fields() != params.dims.n_fields)
    throw ContractError("dataset schema does not match the model dimensions");
  const auto scores = predict_all(params, data);
  const auto labels = labels_of(data);
  return {auc(scores, labels), logloss(scores, labels), data.size()};
}

}  // namespace fwfm
