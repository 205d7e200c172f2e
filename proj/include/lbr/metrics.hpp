#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lbr/embedding_store.hpp"
#include "lbr/mlp.hpp"

namespace lbr {

/// Accuracies for one generator, as percentages.
struct GeneratorResult {
  std::string name;
  std::string store;
  std::uint16_t generator_id = 0;
  std::size_t n_real = 0;
  std::size_t n_fake = 0;
  std::size_t correct_real = 0;
  std::size_t correct_fake = 0;
  double overall_accuracy = 0.0;
  double real_accuracy = 0.0;
  double fake_accuracy = 0.0;
  /// Mean of real and fake accuracy.
  double balanced_accuracy = 0.0;
  bool is_training_generator = false;
};

struct ReliabilityStats {
  double mean = 0.0;
  double std = 0.0;
  /// (mean - a_base) / std. With std == 0 this is +inf above the baseline,
  /// -inf below it and NaN (undefined) when mean == a_base.
  double reliability = 0.0;
};

/// Mean, sample standard deviation (n - 1) and reliability of `accuracies`.
/// Throws DomainError for fewer than two values.
ReliabilityStats reliability(std::span<const double> accuracies, double a_base = 50.0);

/// Minimum of `accuracies`; throws DomainError when empty.
double worst_case(std::span<const double> accuracies);

/// Overall accuracies of the rows that are test generators, plus training
/// generators when `include_training` is set.
std::vector<double> select_accuracies(std::span<const GeneratorResult> rows, bool include_training);

struct EvalOptions {
  /// Predict fake iff sigmoid(logit) >= threshold.
  double threshold = 0.5;
  double a_base = 50.0;
  bool include_training_in_mean = true;
  bool include_training_in_worst = false;
  std::vector<std::string> training_generators;
  /// Display name per store; defaults to "store<i>".
  std::vector<std::string> store_names;
};

struct EvalReport {
  std::string detector;
  std::vector<GeneratorResult> generators;
  std::vector<std::string> warnings;
  double a_base = 50.0;
  double threshold = 0.5;
  bool include_training_in_mean = true;
  bool include_training_in_worst = false;
  std::size_t generators_in_mean = 0;
  /// NaN when fewer than one / two generators are selected.
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;
  double reliability = 0.0;
  double worst_case = 0.0;
};

/// Returns 1 (fake) or 0 (real) for each listed record of `store`.
using RecordClassifier =
    std::function<std::vector<std::uint8_t>(const EmbeddingStore& store,
                                            std::span<const std::size_t> indices)>;

/// Scores every generator's TEST fakes together with the TEST reals of the
/// same store and fills in the aggregates. Generators without TEST records
/// are skipped with a warning.
EvalReport evaluate_with(const RecordClassifier& classify, std::span<const EmbeddingStore> stores,
                         const EvalOptions& options);

/// Evaluates a trained checkpoint. Training generator names are taken from
/// the checkpoint when `options.training_generators` is empty.
EvalReport evaluate(const Checkpoint& checkpoint, std::span<const EmbeddingStore> stores,
                    EvalOptions options = {});

/// Last-hidden-layer activations as a store (dimension = hidden width) with
/// labels, generator ids, splits and manifest entries copied from `store`.
EmbeddingStore export_penultimate(const Checkpoint& checkpoint, const EmbeddingStore& store);

nlohmann::json to_json(const EvalReport& report);
std::string to_csv(const EvalReport& report);
std::string to_text(const EvalReport& report);

}  // namespace lbr
