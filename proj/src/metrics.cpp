#include "lbr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "lbr/error.hpp"
#include "lbr/trainer.hpp"

namespace lbr {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kInf = std::numeric_limits<double>::infinity();

double percent(std::size_t correct, std::size_t total) {
  return total == 0 ? kNaN : 100.0 * static_cast<double>(correct) / static_cast<double>(total);
}

nlohmann::json number_or_marker(double v) {
  if (std::isnan(v)) return "undefined";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

std::string fmt(double v, int decimals) {
  if (std::isnan(v)) return "undefined";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

/// Column-major batch of the listed records.
Eigen::MatrixXd gather(const EmbeddingStore& store, std::span<const std::size_t> indices,
                       bool l2_normalize) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(store.dimension()),
                    static_cast<Eigen::Index>(indices.size()));
  for (std::size_t i = 0; i < indices.size(); ++i) {
    x.col(static_cast<Eigen::Index>(i)) = widen(store.records[indices[i]].embedding, l2_normalize);
  }
  return x;
}

constexpr std::size_t kChunk = 4096;

}  // namespace

ReliabilityStats reliability(std::span<const double> accuracies, double a_base) {
  if (accuracies.size() < 2) {
    throw DomainError("reliability needs at least two accuracies, got " +
                      std::to_string(accuracies.size()));
  }
  const auto n = static_cast<double>(accuracies.size());
  double sum = 0.0;
  for (double a : accuracies) sum += a;
  ReliabilityStats s;
  s.mean = sum / n;
  double ss = 0.0;
  for (double a : accuracies) ss += (a - s.mean) * (a - s.mean);
  s.std = std::sqrt(ss / (n - 1.0));
  const double excess = s.mean - a_base;
  if (s.std > 0.0) {
    s.reliability = excess / s.std;
  } else if (excess > 0.0) {
    s.reliability = kInf;
  } else if (excess < 0.0) {
    s.reliability = -kInf;
  } else {
    s.reliability = kNaN;
  }
  return s;
}

double worst_case(std::span<const double> accuracies) {
  if (accuracies.empty()) throw DomainError("worst_case of an empty set");
  return *std::min_element(accuracies.begin(), accuracies.end());
}

std::vector<double> select_accuracies(std::span<const GeneratorResult> rows, bool include_training) {
  std::vector<double> out;
  for (const auto& r : rows) {
    if (include_training || !r.is_training_generator) out.push_back(r.overall_accuracy);
  }
  return out;
}

EvalReport evaluate_with(const RecordClassifier& classify, std::span<const EmbeddingStore> stores,
                         const EvalOptions& options) {
  EvalReport report;
  report.a_base = options.a_base;
  report.threshold = options.threshold;
  report.include_training_in_mean = options.include_training_in_mean;
  report.include_training_in_worst = options.include_training_in_worst;

  for (std::size_t s = 0; s < stores.size(); ++s) {
    const auto& store = stores[s];
    const auto store_name =
        s < options.store_names.size() ? options.store_names[s] : "store" + std::to_string(s);

    const auto test = partition(store, [](const RecordKey& k) { return k.split == Split::kTest; });
    const auto predictions = classify(store, test);
    if (predictions.size() != test.size()) {
      throw ShapeError("classifier returned " + std::to_string(predictions.size()) +
                       " predictions for " + std::to_string(test.size()) + " records");
    }

    std::size_t n_real = 0;
    std::size_t correct_real = 0;
    std::vector<std::size_t> n_fake(store.manifest.entries.size(), 0);
    std::vector<std::size_t> correct_fake(store.manifest.entries.size(), 0);
    for (std::size_t i = 0; i < test.size(); ++i) {
      const auto& r = store.records[test[i]];
      if (r.label == Label::kReal) {
        ++n_real;
        correct_real += predictions[i] == 0 ? 1 : 0;
      } else {
        ++n_fake[r.generator_id];
        correct_fake[r.generator_id] += predictions[i] == 1 ? 1 : 0;
      }
    }

    auto entries = store.manifest.entries;
    std::sort(entries.begin(), entries.end(),
              [](const ManifestEntry& a, const ManifestEntry& b) { return a.id < b.id; });
    for (const auto& e : entries) {
      if (e.kind != SourceKind::kGenerator) continue;
      if (n_fake[e.id] == 0) {
        report.warnings.push_back("generator '" + e.name + "' in " + store_name +
                                  " has no TEST records; excluded");
        continue;
      }
      GeneratorResult g;
      g.name = e.name;
      g.store = store_name;
      g.generator_id = e.id;
      g.n_real = n_real;
      g.n_fake = n_fake[e.id];
      g.correct_real = correct_real;
      g.correct_fake = correct_fake[e.id];
      g.overall_accuracy = percent(g.correct_real + g.correct_fake, g.n_real + g.n_fake);
      g.real_accuracy = percent(g.correct_real, g.n_real);
      g.fake_accuracy = percent(g.correct_fake, g.n_fake);
      g.balanced_accuracy =
          n_real == 0 ? g.fake_accuracy : 0.5 * (g.real_accuracy + g.fake_accuracy);
      g.is_training_generator =
          std::find(options.training_generators.begin(), options.training_generators.end(),
                    e.name) != options.training_generators.end();
      report.generators.push_back(std::move(g));
    }
  }

  const auto in_mean = select_accuracies(report.generators, options.include_training_in_mean);
  report.generators_in_mean = in_mean.size();
  if (in_mean.size() >= 2) {
    const auto stats = reliability(in_mean, options.a_base);
    report.mean_accuracy = stats.mean;
    report.std_accuracy = stats.std;
    report.reliability = stats.reliability;
  } else {
    report.mean_accuracy = in_mean.empty() ? kNaN : in_mean.front();
    report.std_accuracy = kNaN;
    report.reliability = kNaN;
  }
  const auto in_worst = select_accuracies(report.generators, options.include_training_in_worst);
  report.worst_case = in_worst.empty() ? kNaN : worst_case(in_worst);
  return report;
}

EvalReport evaluate(const Checkpoint& checkpoint, std::span<const EmbeddingStore> stores,
                    EvalOptions options) {
  const auto& model = checkpoint.model;
  for (const auto& store : stores) {
    if (store.dimension() != model.input_dim()) {
      throw ShapeError("store dimension " + std::to_string(store.dimension()) +
                       " does not match model input " + std::to_string(model.input_dim()));
    }
  }
  if (options.training_generators.empty()) {
    options.training_generators = checkpoint.meta.training_generators;
  }
  const bool normalize = checkpoint.meta.l2_normalize;
  const double threshold = options.threshold;
  auto classify = [&](const EmbeddingStore& store, std::span<const std::size_t> indices) {
    std::vector<std::uint8_t> out;
    out.reserve(indices.size());
    for (std::size_t start = 0; start < indices.size(); start += kChunk) {
      const auto chunk = indices.subspan(start, std::min(kChunk, indices.size() - start));
      const auto logits = forward(model, gather(store, chunk, normalize));
      for (Eigen::Index i = 0; i < logits.size(); ++i) {
        out.push_back(sigmoid(logits(i)) >= threshold ? 1 : 0);
      }
    }
    return out;
  };
  auto report = evaluate_with(classify, stores, options);
  report.detector = "mlp depth=" + std::to_string(model.depth()) +
                    " config=" + checkpoint.meta.config_hash;
  return report;
}

EmbeddingStore export_penultimate(const Checkpoint& checkpoint, const EmbeddingStore& store) {
  const auto& model = checkpoint.model;
  if (model.depth() == 0) throw ConfigError("depth-0 model has no penultimate layer");
  if (store.dimension() != model.input_dim()) {
    throw ShapeError("store dimension " + std::to_string(store.dimension()) +
                     " does not match model input " + std::to_string(model.input_dim()));
  }
  EmbeddingStore out;
  out.manifest = store.manifest;
  out.manifest.dimension = static_cast<std::uint32_t>(model.widths()[model.widths().size() - 2]);
  out.manifest.backbone_tag = store.manifest.backbone_tag + " | penultimate depth=" +
                              std::to_string(model.depth()) + " config=" +
                              checkpoint.meta.config_hash;
  out.records.reserve(store.size());

  std::vector<std::size_t> all(store.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  const std::span<const std::size_t> indices(all);
  for (std::size_t start = 0; start < indices.size(); start += kChunk) {
    const auto chunk = indices.subspan(start, std::min(kChunk, indices.size() - start));
    const auto hidden = forward_hidden(model, gather(store, chunk, checkpoint.meta.l2_normalize));
    for (std::size_t i = 0; i < chunk.size(); ++i) {
      const auto& src = store.records[chunk[i]];
      EmbeddingRecord r;
      r.embedding.resize(static_cast<std::size_t>(hidden.rows()));
      for (Eigen::Index k = 0; k < hidden.rows(); ++k) {
        r.embedding[static_cast<std::size_t>(k)] =
            static_cast<float>(hidden(k, static_cast<Eigen::Index>(i)));
      }
      r.label = src.label;
      r.generator_id = src.generator_id;
      r.split = src.split;
      out.records.push_back(std::move(r));
    }
  }
  return out;
}

nlohmann::json to_json(const EvalReport& report) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& g : report.generators) {
    rows.push_back({{"store", g.store},
                    {"generator", g.name},
                    {"generator_id", g.generator_id},
                    {"is_training_generator", g.is_training_generator},
                    {"n_real", g.n_real},
                    {"n_fake", g.n_fake},
                    {"correct_real", g.correct_real},
                    {"correct_fake", g.correct_fake},
                    {"overall_accuracy", number_or_marker(g.overall_accuracy)},
                    {"real_accuracy", number_or_marker(g.real_accuracy)},
                    {"fake_accuracy", number_or_marker(g.fake_accuracy)},
                    {"balanced_accuracy", number_or_marker(g.balanced_accuracy)}});
  }
  return {{"detector", report.detector},
          {"a_base", report.a_base},
          {"threshold", report.threshold},
          {"include_training_in_mean", report.include_training_in_mean},
          {"include_training_in_worst", report.include_training_in_worst},
          {"generators", rows},
          {"warnings", report.warnings},
          {"aggregate",
           {{"generators_in_mean", report.generators_in_mean},
            {"mean_accuracy", number_or_marker(report.mean_accuracy)},
            {"std_accuracy", number_or_marker(report.std_accuracy)},
            {"reliability", number_or_marker(report.reliability)},
            {"worst_case", number_or_marker(report.worst_case)}}}};
}

std::string to_csv(const EvalReport& report) {
  std::ostringstream out;
  out << "kind,store,generator,training,n_real,n_fake,overall,real,fake,balanced\n";
  for (const auto& g : report.generators) {
    out << "generator," << csv_field(g.store) << ',' << csv_field(g.name) << ','
        << (g.is_training_generator ? 1 : 0) << ',' << g.n_real << ',' << g.n_fake << ','
        << fmt(g.overall_accuracy, 6) << ',' << fmt(g.real_accuracy, 6) << ','
        << fmt(g.fake_accuracy, 6) << ',' << fmt(g.balanced_accuracy, 6) << '\n';
  }
  auto footer = [&](const char* name, double v) {
    out << "aggregate,," << name << ",,,," << fmt(v, 6) << ",,,\n";
  };
  footer("mean", report.mean_accuracy);
  footer("std", report.std_accuracy);
  footer("reliability", report.reliability);
  footer("worst_case", report.worst_case);
  footer("a_base", report.a_base);
  return out.str();
}

std::string to_text(const EvalReport& report) {
  std::ostringstream out;
  out << "detector: " << (report.detector.empty() ? "-" : report.detector) << '\n';
  out << "A_base = " << fmt(report.a_base, 2) << "  threshold = " << fmt(report.threshold, 2)
      << "  mean/std over " << (report.include_training_in_mean ? "all" : "test")
      << " generators, worst case over "
      << (report.include_training_in_worst ? "all" : "test") << " generators\n\n";

  std::size_t name_w = 9;
  for (const auto& g : report.generators) name_w = std::max(name_w, g.name.size() + 11);
  char line[512];
  std::snprintf(line, sizeof line, "%-*s %8s %8s %8s %8s %7s %7s\n", static_cast<int>(name_w),
                "Generator", "Acc", "Real", "Fake", "Bal", "n_real", "n_fake");
  out << line;
  for (const auto& g : report.generators) {
    const auto name = g.name + (g.is_training_generator ? " (training)" : "");
    std::snprintf(line, sizeof line, "%-*s %8s %8s %8s %8s %7zu %7zu\n",
                  static_cast<int>(name_w), name.c_str(), fmt(g.overall_accuracy, 2).c_str(),
                  fmt(g.real_accuracy, 2).c_str(), fmt(g.fake_accuracy, 2).c_str(),
                  fmt(g.balanced_accuracy, 2).c_str(), g.n_real, g.n_fake);
    out << line;
  }
  out << '\n';
  std::snprintf(line, sizeof line, "Mean %s  Std %s  Reliability %s  Worst case %s\n",
                fmt(report.mean_accuracy, 2).c_str(), fmt(report.std_accuracy, 2).c_str(),
                fmt(report.reliability, 2).c_str(), fmt(report.worst_case, 2).c_str());
  out << line;
  for (const auto& w : report.warnings) out << "warning: " << w << '\n';
  return out.str();
}

}  // namespace lbr
