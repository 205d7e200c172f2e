#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lbr/embedding_store.hpp"

namespace lbr::synth {

struct Cluster {
  std::vector<double> mean;
  double stddev = 1.0;
};

struct FakeCluster {
  std::string name;
  Cluster cluster;
  Split split = Split::kTrain;
};

/// Parameters of a Gaussian-cluster embedding world.
struct SynthSpec {
  std::uint32_t dimension = 0;
  Cluster real_cluster;
  std::vector<FakeCluster> fake_clusters;
  std::uint32_t samples_per_cluster = 0;
  std::uint64_t seed = 0;

  /// Throws ConfigError on any violated invariant.
  void validate() const;
};

/// Samples the world. Manifest id 0 is the real source; fake clusters follow
/// in declaration order. Reals are drawn for both splits, each fake cluster
/// only for its declared split.
EmbeddingStore generate(const SynthSpec& spec);

/// The fixed desk-scale scenario used by the acceptance suite: 64 dimensions,
/// unit-variance real cluster at the origin, training generators at distance
/// 14 along +e1, -e1 and +e2, and one unseen generator at 3*(e1 + e2).
SynthSpec canonical_scenario();

inline constexpr double kCanonicalTrainDistance = 14.0;
inline constexpr double kCanonicalUnseenOffset = 3.0;

nlohmann::json to_json(const SynthSpec& spec);
/// Throws ConfigError on missing or mistyped fields.
SynthSpec spec_from_json(const nlohmann::json& doc);

}  // namespace lbr::synth
