#pragma once

#include <span>
#include <vector>

#include "lbr/embedding_store.hpp"
#include "lbr/metrics.hpp"

namespace lbr {

/// Real-only detector: diagonal-covariance Mahalanobis distance to the mean
/// of the TRAIN reals, thresholded at a quantile of their own distances.
struct OneClassModel {
  static constexpr double kVarianceFloor = 1e-8;

  std::vector<double> mean;
  /// Per-dimension sample variance (n - 1), floored at kVarianceFloor.
  std::vector<double> variance;
  double threshold = 0.0;
  double quantile = 0.95;

  double distance(std::span<const float> embedding) const;
  bool is_fake(std::span<const float> embedding) const { return distance(embedding) > threshold; }
};

/// Fits on TRAIN reals only; fake records never influence the result.
/// Throws DomainError with fewer than two TRAIN reals or q outside (0, 1).
OneClassModel fit_oneclass(const EmbeddingStore& store, double quantile = 0.95);

/// Linear-interpolated q-quantile of `values` (sorted internally).
double quantile_of(std::vector<double> values, double q);

/// Scores stores through the regular evaluation path; predicts fake iff
/// distance > threshold.
EvalReport score_oneclass(const OneClassModel& model, std::span<const EmbeddingStore> stores,
                          EvalOptions options = {});

}  // namespace lbr
