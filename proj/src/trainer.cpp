#include "lbr/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>

#include "lbr/error.hpp"
#include "lbr/rng.hpp"

namespace lbr {

namespace {

struct KeySpec {
  std::string key;
  std::function<nlohmann::json(const TrainConfig&)> get;
  std::function<void(TrainConfig&, const nlohmann::json&)> set;
};

template <typename T>
T typed(const nlohmann::json& v, const std::string& key) {
  try {
    if constexpr (std::is_same_v<T, double>) {
      if (!v.is_number()) throw ConfigError(key + ": expected a number");
    } else if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError(key + ": expected true or false");
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
        throw ConfigError(key + ": expected a non-negative integer");
      }
    } else {
      if (!v.is_string()) throw ConfigError(key + ": expected a string");
    }
    return v.get<T>();
  } catch (const nlohmann::json::exception& ex) {
    throw ConfigError(key + ": " + ex.what());
  }
}

#define LBR_KEY(name, field, type)                                                  \
  KeySpec {                                                                         \
    name, [](const TrainConfig& c) { return nlohmann::json(c.field); },             \
        [](TrainConfig& c, const nlohmann::json& v) { c.field = typed<type>(v, name); } \
  }

const std::vector<KeySpec>& key_table() {
  static const std::vector<KeySpec> table = {
      LBR_KEY("train.batch_size", batch_size, std::size_t),
      LBR_KEY("train.max_epochs", max_epochs, std::size_t),
      LBR_KEY("train.seed", seed, std::uint64_t),
      LBR_KEY("train.shuffle", shuffle, bool),
      LBR_KEY("train.include_pure_fakes", include_pure_fakes, bool),
      LBR_KEY("train.l2_normalize", l2_normalize, bool),
      LBR_KEY("lbr.enabled", lbr_enabled, bool),
      KeySpec{"lbr.policy", [](const TrainConfig& c) { return nlohmann::json(to_string(c.policy)); },
              [](TrainConfig& c, const nlohmann::json& v) {
                c.policy = pairing_policy_from_string(typed<std::string>(v, "lbr.policy"));
              }},
      LBR_KEY("lbr.upper_bound", upper_bound, double),
      LBR_KEY("model.depth", depth, std::size_t),
      LBR_KEY("model.width", width, std::size_t),
      LBR_KEY("optim.lr", optim.learning_rate, double),
      LBR_KEY("optim.beta1", optim.beta1, double),
      LBR_KEY("optim.beta2", optim.beta2, double),
      LBR_KEY("optim.eps", optim.epsilon, double),
      LBR_KEY("optim.weight_decay", optim.weight_decay, double),
      KeySpec{"optim.decay_mode",
              [](const TrainConfig& c) { return nlohmann::json(to_string(c.optim.decay_mode)); },
              [](TrainConfig& c, const nlohmann::json& v) {
                c.optim.decay_mode = decay_mode_from_string(typed<std::string>(v, "optim.decay_mode"));
              }},
  };
  return table;
}

#undef LBR_KEY

const KeySpec& find_key(const std::string& key) {
  for (const auto& k : key_table()) {
    if (k.key == key) return k;
  }
  throw ConfigError("unknown config key '" + key + "'");
}

void flatten(const nlohmann::json& node, const std::string& prefix,
             std::vector<std::pair<std::string, nlohmann::json>>& out) {
  if (node.is_object()) {
    for (const auto& [k, v] : node.items()) {
      flatten(v, prefix.empty() ? k : prefix + "." + k, out);
    }
  } else {
    out.emplace_back(prefix, node);
  }
}

}  // namespace

void TrainConfig::validate() const {
  if (batch_size == 0) throw ConfigError("train.batch_size must be > 0");
  if (max_epochs == 0) throw ConfigError("train.max_epochs must be > 0");
  if (width == 0) throw ConfigError("model.width must be > 0");
  if (!(upper_bound > 0.5 && upper_bound <= 1.0)) {
    throw ConfigError("lbr.upper_bound must lie in (0.5, 1]");
  }
  if (!(optim.learning_rate > 0.0)) throw ConfigError("optim.lr must be > 0");
  if (!(optim.beta1 >= 0.0 && optim.beta1 < 1.0)) throw ConfigError("optim.beta1 must lie in [0, 1)");
  if (!(optim.beta2 >= 0.0 && optim.beta2 < 1.0)) throw ConfigError("optim.beta2 must lie in [0, 1)");
  if (!(optim.epsilon > 0.0)) throw ConfigError("optim.eps must be > 0");
  if (!(optim.weight_decay >= 0.0)) throw ConfigError("optim.weight_decay must be >= 0");
}

TrainConfig desk_scale_config() {
  TrainConfig c;
  c.batch_size = 100;
  c.width = 256;
  c.optim.learning_rate = 1e-3;
  return c;
}

nlohmann::json to_json(const TrainConfig& config) {
  nlohmann::json out = nlohmann::json::object();
  for (const auto& k : key_table()) out[k.key] = k.get(config);
  return out;
}

TrainConfig config_from_json(const nlohmann::json& doc, TrainConfig base) {
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  std::vector<std::pair<std::string, nlohmann::json>> flat;
  flatten(doc, "", flat);
  for (const auto& [key, value] : flat) find_key(key).set(base, value);
  return base;
}

void set_config_value(TrainConfig& config, const std::string& key, const std::string& value) {
  const auto& spec = find_key(key);
  auto parsed = nlohmann::json::parse(value, nullptr, /*allow_exceptions=*/false);
  if (parsed.is_discarded()) parsed = value;
  spec.set(config, parsed);
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> out;
    for (const auto& k : key_table()) out.push_back(k.key);
    return out;
  }();
  return keys;
}

std::string config_hash(const TrainConfig& config) {
  const auto text = to_json(config).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : text) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

TrainView train_view(const EmbeddingStore& store) {
  TrainView view;
  view.reals = partition(store, [](const RecordKey& k) {
    return k.split == Split::kTrain && k.label == Label::kReal;
  });
  view.fakes = partition(store, [](const RecordKey& k) {
    return k.split == Split::kTrain && k.label == Label::kFake;
  });
  return view;
}

Eigen::VectorXd widen(std::span<const float> embedding, bool l2_normalize) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(embedding.size()));
  for (std::size_t k = 0; k < embedding.size(); ++k) v(static_cast<Eigen::Index>(k)) = embedding[k];
  if (l2_normalize) {
    const double norm = v.norm();
    if (norm > 0.0) v /= norm;
  }
  return v;
}

ExampleSet epoch_examples(const EmbeddingStore& store, const TrainView& view, const BlendPlan& plan,
                          const TrainConfig& config) {
  const bool pure_fakes = !config.lbr_enabled || config.include_pure_fakes;
  const std::size_t blends = config.lbr_enabled ? plan.pairs.size() : 0;
  const std::size_t n = plan.unblended_reals.size() + blends + (pure_fakes ? view.fakes.size() : 0);
  const auto dim = static_cast<Eigen::Index>(store.dimension());

  ExampleSet out;
  out.inputs.resize(dim, static_cast<Eigen::Index>(n));
  out.labels.resize(n);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (config.shuffle) {
    Rng rng(derive_seed(plan.epoch_seed, "shuffle"));
    rng.shuffle(order);
  }

  std::size_t next = 0;
  auto emit = [&](const Eigen::VectorXd& x, double label) {
    const auto col = static_cast<Eigen::Index>(order[next++]);
    out.inputs.col(col) = x;
    out.labels[static_cast<std::size_t>(col)] = label;
  };
  auto embedding = [&](std::size_t index) {
    return widen(store.records[index].embedding, config.l2_normalize);
  };

  for (auto r : plan.unblended_reals) emit(embedding(r), 0.0);
  if (config.lbr_enabled) {
    for (const auto& p : plan.pairs) {
      const Eigen::VectorXd real = embedding(p.real_index);
      const Eigen::VectorXd fake = embedding(p.fake_index);
      const auto mixed = blend(std::span<const double>(real.data(), real.size()),
                               std::span<const double>(fake.data(), fake.size()), p.alpha);
      emit(Eigen::Map<const Eigen::VectorXd>(mixed.data(), dim), 1.0);
    }
  }
  if (pure_fakes) {
    for (auto f : view.fakes) emit(embedding(f), 1.0);
  }
  return out;
}

TrainResult train(const EmbeddingStore& store, const TrainConfig& config,
                  const EpochCallback& on_epoch) {
  config.validate();
  const auto view = train_view(store);
  if (view.reals.empty() || view.fakes.empty()) {
    throw ConfigError("TRAIN split needs both real and fake records (have " +
                      std::to_string(view.reals.size()) + " real, " +
                      std::to_string(view.fakes.size()) + " fake)");
  }

  auto model = MlpModel::kaiming(MlpModel::layout(store.dimension(), config.depth, config.width),
                                 derive_seed(config.seed, "init"));
  auto adam = AdamState::for_model(model);

  TrainResult result;
  bool first_batch = true;
  for (std::size_t epoch = 0; epoch < config.max_epochs; ++epoch) {
    const auto epoch_seed = derive_seed(config.seed, "epoch", epoch);
    BlendPlan plan;
    if (config.lbr_enabled) {
      AlphaSampler sampler(config.upper_bound, derive_seed(epoch_seed, "alpha"));
      plan = build_plan(view, sampler, config.policy, epoch_seed);
    } else {
      plan.epoch_seed = epoch_seed;
      plan.unblended_reals = view.reals;
    }
    const auto examples = epoch_examples(store, view, plan, config);
    const auto n = examples.labels.size();

    double loss_sum = 0.0;
    std::size_t correct = 0;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < n; start += config.batch_size, ++batch_index) {
      const auto count = std::min(config.batch_size, n - start);
      const Eigen::MatrixXd batch =
          examples.inputs.middleCols(static_cast<Eigen::Index>(start), static_cast<Eigen::Index>(count));
      const std::span<const double> labels(examples.labels.data() + start, count);
      auto step = backward(model, batch, labels);
      if (!std::isfinite(step.loss)) {
        throw TrainingAborted("non-finite loss at epoch " + std::to_string(epoch + 1) + ", batch " +
                                  std::to_string(batch_index + 1),
                              static_cast<int>(epoch + 1), static_cast<int>(batch_index + 1));
      }
      if (first_batch) {
        result.log.initial_loss = step.loss;
        first_batch = false;
      }
      loss_sum += step.loss * static_cast<double>(count);
      for (std::size_t i = 0; i < count; ++i) {
        const bool predicted_fake = step.logits(static_cast<Eigen::Index>(i)) >= 0.0;
        correct += predicted_fake == (labels[i] > 0.5) ? 1 : 0;
      }
      adam_step(model, adam, step.gradients, config.optim);
    }

    EpochStats stats;
    stats.epoch = epoch + 1;
    stats.examples = n;
    stats.mean_loss = loss_sum / static_cast<double>(n);
    stats.accuracy = static_cast<double>(correct) / static_cast<double>(n);
    result.log.epochs.push_back(stats);
    if (on_epoch) on_epoch(stats);
  }

  std::map<std::uint16_t, bool> seen;
  for (auto f : view.fakes) seen[store.records[f].generator_id] = true;
  for (const auto& [id, _] : seen) {
    result.checkpoint.meta.training_generators.push_back(store.manifest.find(id)->name);
  }
  result.checkpoint.model = std::move(model);
  result.checkpoint.meta.seed = config.seed;
  result.checkpoint.meta.config = to_json(config);
  result.checkpoint.meta.config_hash = config_hash(config);
  result.checkpoint.meta.l2_normalize = config.l2_normalize;
  return result;
}

nlohmann::json to_json(const TrainingLog& log) {
  nlohmann::json epochs = nlohmann::json::array();
  for (const auto& e : log.epochs) {
    epochs.push_back({{"epoch", e.epoch},
                      {"examples", e.examples},
                      {"mean_loss", e.mean_loss},
                      {"accuracy", e.accuracy}});
  }
  return {{"initial_loss", log.initial_loss}, {"epochs", epochs}};
}

}  // namespace lbr
