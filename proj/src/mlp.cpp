#include "lbr/mlp.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "lbr/error.hpp"
#include "lbr/rng.hpp"

namespace lbr {

namespace {

void check_widths(const std::vector<std::size_t>& widths) {
  if (widths.size() < 2) throw ConfigError("MLP needs at least input and output widths");
  if (widths.back() != 1) throw ConfigError("MLP output width must be 1");
  for (auto w : widths) {
    if (w == 0) throw ConfigError("MLP widths must be positive");
  }
}

void check_input(const MlpModel& model, const Eigen::MatrixXd& inputs) {
  if (static_cast<std::size_t>(inputs.rows()) != model.input_dim()) {
    throw ShapeError("model expects " + std::to_string(model.input_dim()) +
                     "-dimensional inputs, got " + std::to_string(inputs.rows()));
  }
}

Eigen::MatrixXd affine(const AffineLayer& layer, const Eigen::MatrixXd& x) {
  Eigen::MatrixXd z = layer.weight * x;
  z.colwise() += layer.bias;
  return z;
}

}  // namespace

MlpModel MlpModel::zeros(std::vector<std::size_t> widths) {
  check_widths(widths);
  MlpModel m;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const auto in = static_cast<Eigen::Index>(widths[l]);
    const auto out = static_cast<Eigen::Index>(widths[l + 1]);
    m.layers_.push_back({Eigen::MatrixXd::Zero(out, in), Eigen::VectorXd::Zero(out)});
  }
  m.widths_ = std::move(widths);
  return m;
}

MlpModel MlpModel::kaiming(std::vector<std::size_t> widths, std::uint64_t seed) {
  auto m = zeros(std::move(widths));
  Rng rng(seed);
  for (std::size_t l = 0; l + 1 < m.layers_.size(); ++l) {
    auto& w = m.layers_[l].weight;
    const double bound = std::sqrt(6.0 / static_cast<double>(w.cols()));
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = rng.uniform(-bound, bound);
    }
  }
  return m;
}

std::vector<std::size_t> MlpModel::layout(std::size_t input_dim, std::size_t depth,
                                          std::size_t width) {
  std::vector<std::size_t> widths{input_dim};
  widths.insert(widths.end(), depth, width);
  widths.push_back(1);
  return widths;
}

std::size_t MlpModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  return n;
}

ParameterSet zeros_like(const ParameterSet& params) {
  ParameterSet out;
  out.reserve(params.size());
  for (const auto& l : params) {
    out.push_back({Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()),
                   Eigen::VectorXd::Zero(l.bias.size())});
  }
  return out;
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

Eigen::VectorXd forward(const MlpModel& model, const Eigen::MatrixXd& inputs) {
  check_input(model, inputs);
  const auto& layers = model.layers();
  Eigen::MatrixXd a = inputs;
  for (std::size_t l = 0; l + 1 < layers.size(); ++l) a = affine(layers[l], a).cwiseMax(0.0);
  return affine(layers.back(), a).row(0).transpose();
}

Eigen::MatrixXd forward_hidden(const MlpModel& model, const Eigen::MatrixXd& inputs) {
  if (model.depth() == 0) throw ConfigError("depth-0 model has no hidden layer");
  check_input(model, inputs);
  const auto& layers = model.layers();
  Eigen::MatrixXd a = inputs;
  for (std::size_t l = 0; l + 1 < layers.size(); ++l) a = affine(layers[l], a).cwiseMax(0.0);
  return a;
}

double bce_loss(std::span<const double> logits, std::span<const double> labels) {
  if (logits.size() != labels.size()) {
    throw ShapeError("bce_loss: " + std::to_string(logits.size()) + " logits vs " +
                     std::to_string(labels.size()) + " labels");
  }
  if (logits.empty()) throw DomainError("bce_loss: empty batch");
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double z = logits[i];
    total += std::max(z, 0.0) - z * labels[i] + std::log1p(std::exp(-std::abs(z)));
  }
  return total / static_cast<double>(logits.size());
}

BackwardResult backward(const MlpModel& model, const Eigen::MatrixXd& inputs,
                        std::span<const double> labels) {
  check_input(model, inputs);
  const auto n = inputs.cols();
  if (static_cast<std::size_t>(n) != labels.size()) {
    throw ShapeError("backward: " + std::to_string(n) + " inputs vs " +
                     std::to_string(labels.size()) + " labels");
  }
  if (n == 0) throw DomainError("backward: empty batch");

  const auto& layers = model.layers();
  // activations[l] is the input to layer l.
  std::vector<Eigen::MatrixXd> activations;
  activations.reserve(layers.size());
  activations.push_back(inputs);
  for (std::size_t l = 0; l + 1 < layers.size(); ++l) {
    activations.push_back(affine(layers[l], activations.back()).cwiseMax(0.0));
  }

  BackwardResult result;
  result.logits = affine(layers.back(), activations.back()).row(0).transpose();
  result.loss = bce_loss(std::span<const double>(result.logits.data(), labels.size()), labels);

  Eigen::MatrixXd delta(1, n);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    delta(0, i) = (sigmoid(result.logits(i)) - labels[static_cast<std::size_t>(i)]) * inv_n;
  }

  result.gradients.resize(layers.size());
  for (std::size_t l = layers.size(); l-- > 0;) {
    result.gradients[l].weight = delta * activations[l].transpose();
    result.gradients[l].bias = delta.rowwise().sum();
    if (l > 0) {
      Eigen::MatrixXd upstream = layers[l].weight.transpose() * delta;
      delta = (activations[l].array() > 0.0).select(upstream, 0.0);
    }
  }
  return result;
}

std::string to_string(DecayMode mode) {
  return mode == DecayMode::kDecoupled ? "decoupled" : "l2";
}

DecayMode decay_mode_from_string(const std::string& name) {
  if (name == "decoupled") return DecayMode::kDecoupled;
  if (name == "l2") return DecayMode::kL2;
  throw ConfigError("unknown weight decay mode '" + name + "'");
}

AdamState AdamState::for_model(const MlpModel& model) {
  return {zeros_like(model.layers()), zeros_like(model.layers()), 0};
}

void adam_step(MlpModel& model, AdamState& state, const ParameterSet& gradients,
               const AdamConfig& config) {
  auto& params = model.layers();
  auto same_shape = [&](const ParameterSet& other) {
    if (other.size() != params.size()) return false;
    for (std::size_t l = 0; l < params.size(); ++l) {
      if (other[l].weight.rows() != params[l].weight.rows() ||
          other[l].weight.cols() != params[l].weight.cols() ||
          other[l].bias.size() != params[l].bias.size()) {
        return false;
      }
    }
    return true;
  };
  if (!same_shape(gradients)) throw ShapeError("adam_step: gradient shapes differ from model");
  if (!same_shape(state.first_moment) || !same_shape(state.second_moment)) {
    throw ShapeError("adam_step: optimizer state shapes differ from model");
  }

  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(config.beta1, t);
  const double c2 = 1.0 - std::pow(config.beta2, t);
  const double lr = config.learning_rate;
  const double wd = config.weight_decay;
  const bool decoupled = config.decay_mode == DecayMode::kDecoupled;

  auto update = [&](auto& theta, const auto& grad, auto& m, auto& v) {
    auto th = theta.array();
    if (decoupled) {
      th *= 1.0 - lr * wd;
      m.array() = config.beta1 * m.array() + (1.0 - config.beta1) * grad.array();
      v.array() = config.beta2 * v.array() + (1.0 - config.beta2) * grad.array().square();
    } else {
      const auto g = (grad.array() + wd * th).eval();
      m.array() = config.beta1 * m.array() + (1.0 - config.beta1) * g;
      v.array() = config.beta2 * v.array() + (1.0 - config.beta2) * g.square();
    }
    th -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + config.epsilon);
  };

  for (std::size_t l = 0; l < params.size(); ++l) {
    update(params[l].weight, gradients[l].weight, state.first_moment[l].weight,
           state.second_moment[l].weight);
    update(params[l].bias, gradients[l].bias, state.first_moment[l].bias,
           state.second_moment[l].bias);
  }
}

namespace {

constexpr char kCheckpointMagic[4] = {'L', 'B', 'R', 'M'};
constexpr std::uint32_t kCheckpointVersion = 1;

template <typename T>
void put(std::ostream& out, T value) {
  char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  out.write(bytes, sizeof(T));
}

template <typename T>
T take(std::istream& in, const char* what) {
  char bytes[sizeof(T)];
  in.read(bytes, sizeof(T));
  if (in.gcount() != static_cast<std::streamsize>(sizeof(T))) {
    throw Error(std::string("checkpoint truncated in ") + what);
  }
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

}  // namespace

void write_checkpoint(const Checkpoint& checkpoint, std::ostream& sink) {
  const auto& model = checkpoint.model;
  const auto& meta = checkpoint.meta;
  nlohmann::json header = {
      {"format", "lbrkit-mlp"},
      {"widths", model.widths()},
      {"depth", model.depth()},
      {"seed", meta.seed},
      {"config_hash", meta.config_hash},
      {"config", meta.config},
      {"training_generators", meta.training_generators},
      {"l2_normalize", meta.l2_normalize},
      {"parameter_count", model.parameter_count()},
  };
  const auto text = header.dump();
  sink.write(kCheckpointMagic, 4);
  put<std::uint32_t>(sink, kCheckpointVersion);
  put<std::uint64_t>(sink, text.size());
  sink.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& layer : model.layers()) {
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) put<double>(sink, layer.weight(r, c));
    }
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) put<double>(sink, layer.bias(r));
  }
  if (!sink) throw Error("checkpoint write failed");
}

Checkpoint read_checkpoint(std::istream& source) {
  char magic[4] = {};
  source.read(magic, 4);
  if (source.gcount() != 4 || std::memcmp(magic, kCheckpointMagic, 4) != 0) {
    throw Error("checkpoint: bad magic");
  }
  const auto version = take<std::uint32_t>(source, "version");
  if (version != kCheckpointVersion) {
    throw Error("checkpoint: unsupported version " + std::to_string(version));
  }
  const auto header_len = take<std::uint64_t>(source, "header length");
  if (header_len > (1u << 26)) throw Error("checkpoint: header length implausible");
  std::string text(static_cast<std::size_t>(header_len), '\0');
  source.read(text.data(), static_cast<std::streamsize>(header_len));
  if (static_cast<std::uint64_t>(source.gcount()) != header_len) {
    throw Error("checkpoint truncated in header");
  }

  Checkpoint cp;
  try {
    const auto header = nlohmann::json::parse(text);
    cp.model = MlpModel::zeros(header.at("widths").get<std::vector<std::size_t>>());
    cp.meta.seed = header.at("seed").get<std::uint64_t>();
    cp.meta.config_hash = header.at("config_hash").get<std::string>();
    cp.meta.config = header.at("config");
    cp.meta.training_generators = header.at("training_generators").get<std::vector<std::string>>();
    cp.meta.l2_normalize = header.at("l2_normalize").get<bool>();
  } catch (const nlohmann::json::exception& ex) {
    throw Error(std::string("checkpoint header: ") + ex.what());
  }
  for (auto& layer : cp.model.layers()) {
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) {
        layer.weight(r, c) = take<double>(source, "payload");
      }
    }
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) layer.bias(r) = take<double>(source, "payload");
  }
  if (source.peek() != std::char_traits<char>::eof()) throw Error("checkpoint: trailing data");
  return cp;
}

void write_checkpoint_file(const Checkpoint& checkpoint, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string());
  write_checkpoint(checkpoint, out);
}

Checkpoint read_checkpoint_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint " + path.string());
  return read_checkpoint(in);
}

}  // namespace lbr
