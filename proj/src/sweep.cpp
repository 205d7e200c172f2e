#include "lbr/sweep.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <sstream>
#include <thread>

#include "lbr/error.hpp"

namespace lbr {

SweepAxis sweep_axis_from_string(const std::string& name) {
  if (name == "alpha_B") return SweepAxis::kAlphaUpperBound;
  if (name == "depth") return SweepAxis::kDepth;
  throw ConfigError("unknown sweep axis '" + name + "' (expected alpha_B or depth)");
}

std::string to_string(SweepAxis axis) {
  return axis == SweepAxis::kAlphaUpperBound ? "alpha_B" : "depth";
}

TrainConfig apply_setting(const TrainConfig& base, SweepAxis axis, double setting) {
  auto config = base;
  switch (axis) {
    case SweepAxis::kAlphaUpperBound:
      config.upper_bound = setting;
      break;
    case SweepAxis::kDepth:
      if (setting < 0.0 || setting != std::floor(setting)) {
        throw ConfigError("depth grid values must be non-negative integers");
      }
      config.depth = static_cast<std::size_t>(setting);
      break;
  }
  config.validate();
  return config;
}

namespace {

SweepPoint run_point(const EmbeddingStore& store, SweepAxis axis, double setting,
                     const TrainConfig& base) {
  SweepPoint point;
  point.setting = setting;
  point.config = apply_setting(base, axis, setting);
  const auto trained = train(store, point.config);
  point.train_accuracy = 100.0 * trained.log.epochs.back().accuracy;
  const std::span<const EmbeddingStore> stores(&store, 1);
  point.report = evaluate(trained.checkpoint, stores);

  double real = 0.0;
  double fake = 0.0;
  std::size_t n = 0;
  for (const auto& g : point.report.generators) {
    if (g.is_training_generator) continue;
    real += g.real_accuracy;
    fake += g.fake_accuracy;
    ++n;
  }
  point.mean_real_accuracy = n ? real / static_cast<double>(n) : std::nan("");
  point.mean_fake_accuracy = n ? fake / static_cast<double>(n) : std::nan("");
  return point;
}

}  // namespace

std::vector<SweepPoint> run_sweep(const EmbeddingStore& store, SweepAxis axis,
                                  std::span<const double> grid, const TrainConfig& base,
                                  std::size_t workers) {
  if (grid.empty()) throw ConfigError("sweep grid is empty");
  for (double s : grid) apply_setting(base, axis, s);

  std::vector<SweepPoint> points(grid.size());
  std::vector<std::exception_ptr> failures(grid.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < grid.size(); i = next++) {
      try {
        points[i] = run_point(store, axis, grid[i], base);
      } catch (...) {
        failures[i] = std::current_exception();
      }
    }
  };
  workers = std::max<std::size_t>(1, std::min(workers, grid.size()));
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  for (auto& f : failures) {
    if (f) std::rethrow_exception(f);
  }
  return points;
}

std::string sweep_csv(SweepAxis axis, std::span<const SweepPoint> points) {
  auto fmt = [](double v) {
    if (std::isnan(v)) return std::string("undefined");
    if (std::isinf(v)) return std::string(v > 0 ? "inf" : "-inf");
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return std::string(buf);
  };
  std::ostringstream out;
  out << to_string(axis)
      << ",mean_accuracy,std_accuracy,reliability,worst_case,train_accuracy,"
         "mean_real_accuracy,mean_fake_accuracy\n";
  for (const auto& p : points) {
    out << (axis == SweepAxis::kDepth ? std::to_string(p.config.depth) : fmt(p.setting)) << ','
        << fmt(p.report.mean_accuracy) << ',' << fmt(p.report.std_accuracy) << ','
        << fmt(p.report.reliability) << ',' << fmt(p.report.worst_case) << ','
        << fmt(p.train_accuracy) << ',' << fmt(p.mean_real_accuracy) << ','
        << fmt(p.mean_fake_accuracy) << '\n';
  }
  return out.str();
}

}  // namespace lbr
