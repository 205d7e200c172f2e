#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lbr/rng.hpp"

namespace lbr {

/// Draws blend weights uniformly from [0.5, upper_bound).
class AlphaSampler {
 public:
  static constexpr double kLower = 0.5;

  /// Throws ConfigError unless 0.5 < upper_bound <= 1.
  AlphaSampler(double upper_bound, std::uint64_t seed);

  double sample();
  double upper_bound() const noexcept { return upper_; }

 private:
  double upper_;
  Rng rng_;
};

/// alpha * real + (1 - alpha) * fake, componentwise. alpha must lie in [0, 1].
std::vector<double> blend(std::span<const double> real, std::span<const double> fake, double alpha);
std::vector<double> blend(std::span<const float> real, std::span<const float> fake, double alpha);

enum class PairingPolicy {
  /// Every fake is consumed once as a blend with a randomly drawn real.
  kPairEveryFake,
  /// Every real flips a fair coin: stay real, or become a blend with a random fake.
  kRandomRelabel,
};

std::string to_string(PairingPolicy policy);
/// Accepts "pair_every_fake" / "random_relabel"; throws ConfigError otherwise.
PairingPolicy pairing_policy_from_string(const std::string& name);

/// Record indices of the TRAIN reals and fakes a plan draws from.
struct TrainView {
  std::vector<std::size_t> reals;
  std::vector<std::size_t> fakes;
};

struct BlendPair {
  std::size_t fake_index;
  std::size_t real_index;
  double alpha;

  bool operator==(const BlendPair&) const = default;
};

struct BlendPlan {
  PairingPolicy policy = PairingPolicy::kPairEveryFake;
  std::uint64_t epoch_seed = 0;
  /// Blends, each labelled fake.
  std::vector<BlendPair> pairs;
  /// Reals emitted unblended with the real label.
  std::vector<std::size_t> unblended_reals;

  bool operator==(const BlendPlan&) const = default;
};

/// Partners are drawn from a stream derived from `epoch_seed`; alphas come
/// from `sampler`. Throws ConfigError when either index set is empty.
BlendPlan build_plan(const TrainView& view, AlphaSampler& sampler, PairingPolicy policy,
                     std::uint64_t epoch_seed);

}  // namespace lbr
