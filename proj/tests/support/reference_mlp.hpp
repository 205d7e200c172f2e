#pragma once

// Loop-based reference forward pass and central-difference gradients. Kept
// free of Eigen expressions so it checks the library rather than mirroring it.

#include <algorithm>
#include <cmath>
#include <vector>

#include "lbr/mlp.hpp"
#include "lbr/rng.hpp"

namespace lbr::test {

inline double reference_logit(const MlpModel& model, const std::vector<double>& x) {
  std::vector<double> a = x;
  const auto& layers = model.layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& w = layers[l].weight;
    std::vector<double> z(static_cast<std::size_t>(w.rows()));
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      double s = layers[l].bias(i);
      for (Eigen::Index j = 0; j < w.cols(); ++j) s += w(i, j) * a[static_cast<std::size_t>(j)];
      z[static_cast<std::size_t>(i)] = l + 1 < layers.size() ? std::max(s, 0.0) : s;
    }
    a = std::move(z);
  }
  return a[0];
}

inline double reference_loss(const MlpModel& model, const std::vector<std::vector<double>>& xs,
                             const std::vector<double>& ys) {
  double total = 0.0;
  for (std::size_t n = 0; n < xs.size(); ++n) {
    const double z = reference_logit(model, xs[n]);
    const double p = 1.0 / (1.0 + std::exp(-z));
    total += -(ys[n] * std::log(p) + (1.0 - ys[n]) * std::log(1.0 - p));
  }
  return total / static_cast<double>(xs.size());
}

/// Central differences over every parameter, same layout as ParameterSet.
inline ParameterSet numeric_gradient(MlpModel model, const std::vector<std::vector<double>>& xs,
                                     const std::vector<double>& ys, double h = 1e-6) {
  ParameterSet grad = zeros_like(model.layers());
  auto probe = [&](double& theta) {
    const double saved = theta;
    theta = saved + h;
    const double up = reference_loss(model, xs, ys);
    theta = saved - h;
    const double down = reference_loss(model, xs, ys);
    theta = saved;
    return (up - down) / (2.0 * h);
  };
  for (std::size_t l = 0; l < model.layers().size(); ++l) {
    auto& layer = model.layers()[l];
    for (Eigen::Index i = 0; i < layer.weight.rows(); ++i) {
      for (Eigen::Index j = 0; j < layer.weight.cols(); ++j) {
        grad[l].weight(i, j) = probe(layer.weight(i, j));
      }
      grad[l].bias(i) = probe(layer.bias(i));
    }
  }
  return grad;
}

/// max |a - b| / max(1e-8, max |b|) over all entries.
inline double relative_error(const ParameterSet& a, const ParameterSet& b) {
  double diff = 0.0;
  double scale = 0.0;
  for (std::size_t l = 0; l < a.size(); ++l) {
    diff = std::max(diff, (a[l].weight - b[l].weight).cwiseAbs().maxCoeff());
    diff = std::max(diff, (a[l].bias - b[l].bias).cwiseAbs().maxCoeff());
    scale = std::max(scale, b[l].weight.cwiseAbs().maxCoeff());
    scale = std::max(scale, b[l].bias.cwiseAbs().maxCoeff());
  }
  return diff / std::max(scale, 1e-8);
}

/// Random model with every layer (output included) randomly initialised,
/// so the gradient check exercises all paths.
inline MlpModel random_model(Rng& rng, std::vector<std::size_t> widths) {
  auto m = MlpModel::zeros(widths);
  for (auto& layer : m.layers()) {
    for (Eigen::Index i = 0; i < layer.weight.size(); ++i) layer.weight.data()[i] = rng.normal() * 0.7;
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) layer.bias(i) = rng.normal() * 0.3;
  }
  return m;
}

}  // namespace lbr::test
