#include "lbr/synthetic.hpp"

#include <cmath>

#include "lbr/rng.hpp"

namespace lbr::synth {

namespace {

void check_cluster(const Cluster& c, std::uint32_t dim, const std::string& what) {
  if (c.mean.size() != dim) {
    throw ConfigError(what + ": mean has length " + std::to_string(c.mean.size()) +
                      ", expected " + std::to_string(dim));
  }
  if (!(c.stddev > 0.0) || !std::isfinite(c.stddev)) {
    throw ConfigError(what + ": stddev must be > 0");
  }
  for (double v : c.mean) {
    if (!std::isfinite(v)) throw ConfigError(what + ": non-finite mean component");
  }
}

void draw(Rng& rng, const Cluster& c, Label label, std::uint16_t id, Split split,
          std::uint32_t count, std::vector<EmbeddingRecord>& out) {
  for (std::uint32_t n = 0; n < count; ++n) {
    EmbeddingRecord r;
    r.embedding.resize(c.mean.size());
    for (std::size_t k = 0; k < c.mean.size(); ++k) {
      r.embedding[k] = static_cast<float>(c.mean[k] + c.stddev * rng.normal());
    }
    r.label = label;
    r.generator_id = id;
    r.split = split;
    out.push_back(std::move(r));
  }
}

std::vector<double> axis(std::uint32_t dim, std::size_t k, double scale) {
  std::vector<double> v(dim, 0.0);
  v[k] = scale;
  return v;
}

}  // namespace

void SynthSpec::validate() const {
  if (dimension == 0) throw ConfigError("dimension must be > 0");
  if (samples_per_cluster == 0) throw ConfigError("samples_per_cluster must be > 0");
  check_cluster(real_cluster, dimension, "real cluster");
  bool has_train = false;
  bool has_test = false;
  for (const auto& f : fake_clusters) {
    check_cluster(f.cluster, dimension, "fake cluster '" + f.name + "'");
    has_train |= f.split == Split::kTrain;
    has_test |= f.split == Split::kTest;
  }
  if (!has_train || !has_test) {
    throw ConfigError("need at least one TRAIN and one TEST fake cluster");
  }
  if (fake_clusters.size() + 1 > 0xffff) throw ConfigError("too many clusters");
}

EmbeddingStore generate(const SynthSpec& spec) {
  spec.validate();

  EmbeddingStore store;
  store.manifest.dimension = spec.dimension;
  store.manifest.backbone_tag = "synthetic-gaussian seed=" + std::to_string(spec.seed);
  store.manifest.entries.push_back({0, "real", SourceKind::kRealSource});
  for (std::size_t i = 0; i < spec.fake_clusters.size(); ++i) {
    store.manifest.entries.push_back(
        {static_cast<std::uint16_t>(i + 1), spec.fake_clusters[i].name, SourceKind::kGenerator});
  }

  // One stream per cluster/split so adding a cluster never perturbs the others.
  {
    Rng train_rng(derive_seed(spec.seed, "real", 0));
    draw(train_rng, spec.real_cluster, Label::kReal, 0, Split::kTrain, spec.samples_per_cluster,
         store.records);
    Rng test_rng(derive_seed(spec.seed, "real", 1));
    draw(test_rng, spec.real_cluster, Label::kReal, 0, Split::kTest, spec.samples_per_cluster,
         store.records);
  }
  for (std::size_t i = 0; i < spec.fake_clusters.size(); ++i) {
    const auto& f = spec.fake_clusters[i];
    Rng rng(derive_seed(spec.seed, "fake", i));
    draw(rng, f.cluster, Label::kFake, static_cast<std::uint16_t>(i + 1), f.split,
         spec.samples_per_cluster, store.records);
  }
  return store;
}

SynthSpec canonical_scenario() {
  constexpr std::uint32_t dim = 64;
  SynthSpec spec;
  spec.dimension = dim;
  spec.real_cluster = {std::vector<double>(dim, 0.0), 1.0};
  const double d = kCanonicalTrainDistance;
  spec.fake_clusters = {
      {"train_pos_e1", {axis(dim, 0, d), 1.0}, Split::kTrain},
      {"train_neg_e1", {axis(dim, 0, -d), 1.0}, Split::kTrain},
      {"train_pos_e2", {axis(dim, 1, d), 1.0}, Split::kTrain},
  };
  auto unseen = axis(dim, 0, kCanonicalUnseenOffset);
  unseen[1] = kCanonicalUnseenOffset;
  spec.fake_clusters.push_back({"unseen_diag_e1e2", {unseen, 1.0}, Split::kTest});
  spec.samples_per_cluster = 2000;
  spec.seed = 7;
  return spec;
}

nlohmann::json to_json(const SynthSpec& spec) {
  auto cluster = [](const Cluster& c) {
    return nlohmann::json{{"mean", c.mean}, {"stddev", c.stddev}};
  };
  nlohmann::json fakes = nlohmann::json::array();
  for (const auto& f : spec.fake_clusters) {
    auto j = cluster(f.cluster);
    j["name"] = f.name;
    j["split"] = to_string(f.split);
    fakes.push_back(std::move(j));
  }
  return {{"dimension", spec.dimension},
          {"real_cluster", cluster(spec.real_cluster)},
          {"fake_clusters", fakes},
          {"samples_per_cluster", spec.samples_per_cluster},
          {"seed", spec.seed}};
}

SynthSpec spec_from_json(const nlohmann::json& doc) {
  try {
    auto cluster = [](const nlohmann::json& j) {
      return Cluster{j.at("mean").get<std::vector<double>>(), j.at("stddev").get<double>()};
    };
    SynthSpec spec;
    spec.dimension = doc.at("dimension").get<std::uint32_t>();
    spec.real_cluster = cluster(doc.at("real_cluster"));
    for (const auto& f : doc.at("fake_clusters")) {
      FakeCluster fc;
      fc.name = f.at("name").get<std::string>();
      fc.cluster = cluster(f);
      const auto split = f.at("split").get<std::string>();
      if (split == "train") {
        fc.split = Split::kTrain;
      } else if (split == "test") {
        fc.split = Split::kTest;
      } else {
        throw ConfigError("fake cluster '" + fc.name + "': split must be train or test");
      }
      spec.fake_clusters.push_back(std::move(fc));
    }
    spec.samples_per_cluster = doc.at("samples_per_cluster").get<std::uint32_t>();
    spec.seed = doc.value("seed", std::uint64_t{0});
    return spec;
  } catch (const nlohmann::json::exception& ex) {
    throw ConfigError(std::string("synth spec: ") + ex.what());
  }
}

}  // namespace lbr::synth
