#pragma once

#include <span>
#include <string>
#include <vector>

#include "lbr/metrics.hpp"
#include "lbr/trainer.hpp"

namespace lbr {

enum class SweepAxis { kAlphaUpperBound, kDepth };

/// "alpha_B" or "depth"; anything else raises ConfigError.
SweepAxis sweep_axis_from_string(const std::string& name);
std::string to_string(SweepAxis axis);

struct SweepPoint {
  double setting = 0.0;
  TrainConfig config;
  /// Final-epoch training accuracy, percent.
  double train_accuracy = 0.0;
  /// Means over the test generators of the report.
  double mean_real_accuracy = 0.0;
  double mean_fake_accuracy = 0.0;
  EvalReport report;
};

/// `base` with the swept field replaced by `setting`.
TrainConfig apply_setting(const TrainConfig& base, SweepAxis axis, double setting);

/// One independent training + evaluation per grid point, on up to `workers`
/// threads. Results come back in grid order and do not depend on `workers`.
std::vector<SweepPoint> run_sweep(const EmbeddingStore& store, SweepAxis axis,
                                  std::span<const double> grid, const TrainConfig& base,
                                  std::size_t workers = 1);

std::string sweep_csv(SweepAxis axis, std::span<const SweepPoint> points);

}  // namespace lbr
