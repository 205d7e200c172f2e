#include "lbr/blending.hpp"

#include "lbr/error.hpp"

namespace lbr {

AlphaSampler::AlphaSampler(double upper_bound, std::uint64_t seed)
    : upper_(upper_bound), rng_(seed) {
  if (!(upper_bound > kLower && upper_bound <= 1.0)) {
    throw ConfigError("alpha upper bound must lie in (0.5, 1], got " + std::to_string(upper_bound));
  }
}

double AlphaSampler::sample() { return rng_.uniform(kLower, upper_); }

namespace {

template <typename T>
std::vector<double> blend_impl(std::span<const T> real, std::span<const T> fake, double alpha) {
  if (real.size() != fake.size()) {
    throw ShapeError("blend: real has " + std::to_string(real.size()) + " components, fake has " +
                     std::to_string(fake.size()));
  }
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw DomainError("blend: alpha outside [0, 1]");
  const double beta = 1.0 - alpha;
  std::vector<double> out(real.size());
  for (std::size_t k = 0; k < real.size(); ++k) {
    out[k] = alpha * static_cast<double>(real[k]) + beta * static_cast<double>(fake[k]);
  }
  return out;
}

}  // namespace

std::vector<double> blend(std::span<const double> real, std::span<const double> fake,
                          double alpha) {
  return blend_impl(real, fake, alpha);
}

std::vector<double> blend(std::span<const float> real, std::span<const float> fake, double alpha) {
  return blend_impl(real, fake, alpha);
}

std::string to_string(PairingPolicy policy) {
  return policy == PairingPolicy::kPairEveryFake ? "pair_every_fake" : "random_relabel";
}

PairingPolicy pairing_policy_from_string(const std::string& name) {
  if (name == "pair_every_fake") return PairingPolicy::kPairEveryFake;
  if (name == "random_relabel") return PairingPolicy::kRandomRelabel;
  throw ConfigError("unknown pairing policy '" + name + "'");
}

BlendPlan build_plan(const TrainView& view, AlphaSampler& sampler, PairingPolicy policy,
                     std::uint64_t epoch_seed) {
  if (view.reals.empty()) throw ConfigError("blend plan needs at least one real record");
  if (view.fakes.empty()) throw ConfigError("blend plan needs at least one fake record");

  BlendPlan plan;
  plan.policy = policy;
  plan.epoch_seed = epoch_seed;
  Rng partners(derive_seed(epoch_seed, "pairing"));

  switch (policy) {
    case PairingPolicy::kPairEveryFake:
      plan.pairs.reserve(view.fakes.size());
      for (auto fake : view.fakes) {
        const auto real = view.reals[partners.index(view.reals.size())];
        plan.pairs.push_back({fake, real, sampler.sample()});
      }
      plan.unblended_reals = view.reals;
      break;
    case PairingPolicy::kRandomRelabel:
      for (auto real : view.reals) {
        if (partners.coin()) {
          const auto fake = view.fakes[partners.index(view.fakes.size())];
          plan.pairs.push_back({fake, real, sampler.sample()});
        } else {
          plan.unblended_reals.push_back(real);
        }
      }
      break;
  }
  return plan;
}

}  // namespace lbr
