#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "lbr/blending.hpp"
#include "lbr/embedding_store.hpp"
#include "lbr/mlp.hpp"

namespace lbr {

struct TrainConfig {
  // train.*
  std::size_t batch_size = 500;
  std::size_t max_epochs = 10;
  std::uint64_t seed = 0;
  bool shuffle = true;
  bool include_pure_fakes = false;
  bool l2_normalize = false;
  // lbr.*
  bool lbr_enabled = true;
  PairingPolicy policy = PairingPolicy::kPairEveryFake;
  double upper_bound = 0.8;
  // model.*
  std::size_t depth = 1;
  std::size_t width = 1024;
  // optim.*
  AdamConfig optim;

  /// Throws ConfigError on out-of-range values.
  void validate() const;
};

/// Settings for the synthetic desk-scale worlds: the default budget (lr 1e-4,
/// batch 500) takes only ~160 steps on 8000 examples, too few to converge.
TrainConfig desk_scale_config();

/// Flat JSON object keyed by dotted names ("train.batch_size", "lbr.upper_bound", ...).
nlohmann::json to_json(const TrainConfig& config);

/// Accepts flat dotted keys and/or nested objects, applied on top of `base`.
/// Unknown keys and mistyped values raise ConfigError.
TrainConfig config_from_json(const nlohmann::json& doc, TrainConfig base = {});

/// Applies one dotted-key override; `value` is parsed as a JSON literal when
/// possible ("false", "0.99", "4") and taken as a bare string otherwise.
void set_config_value(TrainConfig& config, const std::string& key, const std::string& value);

/// Every dotted key, in a stable order.
const std::vector<std::string>& config_keys();

/// FNV-1a 64 of the flat JSON dump, hex.
std::string config_hash(const TrainConfig& config);

/// TRAIN-split real and fake record indices.
TrainView train_view(const EmbeddingStore& store);

/// Embedding widened to double, optionally scaled to unit L2 norm.
Eigen::VectorXd widen(std::span<const float> embedding, bool l2_normalize);

struct ExampleSet {
  Eigen::MatrixXd inputs;  // dim x n, one example per column
  std::vector<double> labels;
};

/// One epoch of training examples: unblended reals (label 0), the plan's
/// blends (label 1), and pure fakes (label 1) when LBR is off or
/// include_pure_fakes is set. Shuffled by a stream derived from plan.epoch_seed.
ExampleSet epoch_examples(const EmbeddingStore& store, const TrainView& view, const BlendPlan& plan,
                          const TrainConfig& config);

struct EpochStats {
  std::size_t epoch = 0;
  std::size_t examples = 0;
  double mean_loss = 0.0;
  double accuracy = 0.0;
};

struct TrainingLog {
  /// Loss of the first batch before any update.
  double initial_loss = 0.0;
  std::vector<EpochStats> epochs;
};

struct TrainResult {
  Checkpoint checkpoint;
  TrainingLog log;
};

using EpochCallback = std::function<void(const EpochStats&)>;

/// Runs the full fixed-budget training. Pure function of (store, config).
TrainResult train(const EmbeddingStore& store, const TrainConfig& config,
                  const EpochCallback& on_epoch = {});

nlohmann::json to_json(const TrainingLog& log);

}  // namespace lbr
