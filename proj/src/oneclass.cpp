#include "lbr/oneclass.hpp"

#include <algorithm>
#include <cmath>

#include "lbr/error.hpp"

namespace lbr {

double OneClassModel::distance(std::span<const float> embedding) const {
  if (embedding.size() != mean.size()) {
    throw ShapeError("one-class model expects " + std::to_string(mean.size()) +
                     " components, got " + std::to_string(embedding.size()));
  }
  double sum = 0.0;
  for (std::size_t k = 0; k < mean.size(); ++k) {
    const double d = static_cast<double>(embedding[k]) - mean[k];
    sum += d * d / variance[k];
  }
  return std::sqrt(sum);
}

double quantile_of(std::vector<double> values, double q) {
  if (values.empty()) throw DomainError("quantile of an empty set");
  std::sort(values.begin(), values.end());
  const double h = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

OneClassModel fit_oneclass(const EmbeddingStore& store, double quantile) {
  if (!(quantile > 0.0 && quantile < 1.0)) throw DomainError("quantile must lie in (0, 1)");
  const auto reals = partition(store, [](const RecordKey& k) {
    return k.split == Split::kTrain && k.label == Label::kReal;
  });
  if (reals.size() < 2) {
    throw DomainError("one-class fit needs at least two TRAIN reals, got " +
                      std::to_string(reals.size()));
  }

  const std::size_t dim = store.dimension();
  OneClassModel model;
  model.quantile = quantile;
  model.mean.assign(dim, 0.0);
  model.variance.assign(dim, 0.0);
  for (auto i : reals) {
    const auto& e = store.records[i].embedding;
    for (std::size_t k = 0; k < dim; ++k) model.mean[k] += e[k];
  }
  const auto n = static_cast<double>(reals.size());
  for (auto& m : model.mean) m /= n;
  for (auto i : reals) {
    const auto& e = store.records[i].embedding;
    for (std::size_t k = 0; k < dim; ++k) {
      const double d = static_cast<double>(e[k]) - model.mean[k];
      model.variance[k] += d * d;
    }
  }
  for (auto& v : model.variance) v = std::max(v / (n - 1.0), OneClassModel::kVarianceFloor);

  std::vector<double> distances;
  distances.reserve(reals.size());
  for (auto i : reals) distances.push_back(model.distance(store.records[i].embedding));
  model.threshold = quantile_of(std::move(distances), quantile);
  return model;
}

EvalReport score_oneclass(const OneClassModel& model, std::span<const EmbeddingStore> stores,
                          EvalOptions options) {
  for (const auto& store : stores) {
    if (store.dimension() != model.mean.size()) {
      throw ShapeError("store dimension " + std::to_string(store.dimension()) +
                       " does not match one-class model " + std::to_string(model.mean.size()));
    }
  }
  auto classify = [&](const EmbeddingStore& store, std::span<const std::size_t> indices) {
    std::vector<std::uint8_t> out;
    out.reserve(indices.size());
    for (auto i : indices) out.push_back(model.is_fake(store.records[i].embedding) ? 1 : 0);
    return out;
  };
  auto report = evaluate_with(classify, stores, options);
  report.detector = "oneclass-mahalanobis q=" + std::to_string(model.quantile);
  return report;
}

}  // namespace lbr
