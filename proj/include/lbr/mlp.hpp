#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

namespace lbr {

/// One affine map; weight is (out x in).
struct AffineLayer {
  Eigen::MatrixXd weight;
  Eigen::VectorXd bias;
};

/// Parameters (or gradients, or optimizer moments) of an MLP, input layer first.
using ParameterSet = std::vector<AffineLayer>;

/// ReLU MLP producing a single logit. widths = [input, hidden_1, ..., hidden_d, 1].
class MlpModel {
 public:
  MlpModel() = default;

  /// All weights and biases zero.
  static MlpModel zeros(std::vector<std::size_t> widths);

  /// Hidden layers get Kaiming-uniform weights (bound sqrt(6 / fan_in)); the
  /// output layer and every bias start at zero so the initial logit is 0.
  static MlpModel kaiming(std::vector<std::size_t> widths, std::uint64_t seed);

  /// widths for `depth` hidden layers of `width` units on `input_dim` inputs.
  static std::vector<std::size_t> layout(std::size_t input_dim, std::size_t depth,
                                         std::size_t width);

  const std::vector<std::size_t>& widths() const noexcept { return widths_; }
  std::size_t input_dim() const { return widths_.front(); }
  /// Number of hidden layers.
  std::size_t depth() const { return widths_.size() - 2; }
  std::size_t parameter_count() const;

  ParameterSet& layers() noexcept { return layers_; }
  const ParameterSet& layers() const noexcept { return layers_; }

 private:
  std::vector<std::size_t> widths_;
  ParameterSet layers_;
};

/// Same shapes as `params`, every entry zero.
ParameterSet zeros_like(const ParameterSet& params);

double sigmoid(double z);

/// Logits for a batch laid out one example per column (input_dim x n).
Eigen::VectorXd forward(const MlpModel& model, const Eigen::MatrixXd& inputs);

/// Activations of the last hidden layer (width x n). Throws ConfigError for depth 0.
Eigen::MatrixXd forward_hidden(const MlpModel& model, const Eigen::MatrixXd& inputs);

/// Mean binary cross-entropy in the form max(z,0) - z*y + log(1 + exp(-|z|)).
double bce_loss(std::span<const double> logits, std::span<const double> labels);

struct BackwardResult {
  double loss = 0.0;
  Eigen::VectorXd logits;
  ParameterSet gradients;
};

/// Mean BCE and its exact gradient with respect to every parameter.
BackwardResult backward(const MlpModel& model, const Eigen::MatrixXd& inputs,
                        std::span<const double> labels);

enum class DecayMode { kDecoupled, kL2 };

std::string to_string(DecayMode mode);
DecayMode decay_mode_from_string(const std::string& name);

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 1e-2;
  DecayMode decay_mode = DecayMode::kDecoupled;
};

struct AdamState {
  ParameterSet first_moment;
  ParameterSet second_moment;
  std::uint64_t step = 0;

  static AdamState for_model(const MlpModel& model);
};

/// One bias-corrected Adam update. Decoupled decay scales parameters by
/// (1 - lr * wd) before the moment update; L2 mode adds wd * theta to the gradient.
void adam_step(MlpModel& model, AdamState& state, const ParameterSet& gradients,
               const AdamConfig& config);

struct CheckpointMeta {
  std::uint64_t seed = 0;
  std::string config_hash;
  nlohmann::json config = nlohmann::json::object();
  std::vector<std::string> training_generators;
  bool l2_normalize = false;
};

struct Checkpoint {
  MlpModel model;
  CheckpointMeta meta;
};

/// "LBRM" | u32 version | u64 header length | JSON header | f64 payload, each
/// layer's weight row-major then its bias, input layer first.
void write_checkpoint(const Checkpoint& checkpoint, std::ostream& sink);
Checkpoint read_checkpoint(std::istream& source);
void write_checkpoint_file(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint read_checkpoint_file(const std::filesystem::path& path);

}  // namespace lbr
