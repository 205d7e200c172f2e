#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lbr/blending.hpp"
#include "lbr/error.hpp"

using namespace lbr;

namespace {

TrainView view_of(std::size_t reals, std::size_t fakes) {
  TrainView v;
  for (std::size_t i = 0; i < reals; ++i) v.reals.push_back(i);
  for (std::size_t i = 0; i < fakes; ++i) v.fakes.push_back(reals + i);
  return v;
}

double norm(const std::vector<double>& v) {
  return std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
}

}  // namespace

TEST_CASE("alpha draws stay inside [0.5, B)") {
  for (double b : {0.5001, 0.6, 0.8, 0.99, 1.0}) {
    AlphaSampler s(b, 3);
    for (int i = 0; i < 20000; ++i) {
      const double a = s.sample();
      REQUIRE(a >= 0.5);
      REQUIRE(a < b);
    }
  }
}

TEST_CASE("alpha mean matches the uniform midpoint") {
  // sd of U[0.5, 0.8) is 0.3 / sqrt(12) ~ 0.087; over 1e5 draws the standard error is ~3e-4.
  AlphaSampler s(0.8, 99);
  double sum = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) sum += s.sample();
  CHECK(std::abs(sum / n - 0.65) < 0.005);
}

TEST_CASE("upper bound outside (0.5, 1] is rejected") {
  CHECK_THROWS_AS(AlphaSampler(0.5, 0), ConfigError);
  CHECK_THROWS_AS(AlphaSampler(0.3, 0), ConfigError);
  CHECK_THROWS_AS(AlphaSampler(1.01, 0), ConfigError);
  CHECK_THROWS_AS(AlphaSampler(std::nan(""), 0), ConfigError);
  CHECK_NOTHROW(AlphaSampler(1.0, 0));
}

TEST_CASE("blend identities") {
  const std::vector<double> r{1.0, -2.0, 3.5};
  const std::vector<double> f{4.0, 0.25, -1.0};
  CHECK(blend(r, f, 1.0) == r);
  CHECK(blend(r, f, 0.0) == f);
  const auto mid = blend(r, f, 0.5);
  for (std::size_t k = 0; k < r.size(); ++k) CHECK(mid[k] == doctest::Approx((r[k] + f[k]) / 2));

  const auto worked = blend(std::vector<double>{2.0, 0.0}, std::vector<double>{0.0, 2.0}, 0.75);
  CHECK(worked[0] == doctest::Approx(1.5));
  CHECK(worked[1] == doctest::Approx(0.5));

  const std::vector<float> rf{2.0f, 0.0f};
  const std::vector<float> ff{0.0f, 2.0f};
  const auto wf = blend(rf, ff, 0.75);
  CHECK(wf[0] == doctest::Approx(1.5));
}

TEST_CASE("blend rejects bad shapes and weights") {
  const std::vector<double> a{1.0, 2.0};
  const std::vector<double> b{1.0};
  CHECK_THROWS_AS(blend(a, b, 0.5), ShapeError);
  CHECK_THROWS_AS(blend(a, a, 1.5), DomainError);
  CHECK_THROWS_AS(blend(a, a, -0.1), DomainError);
}

TEST_CASE("blends are convex combinations") {
  Rng rng(5);
  for (int t = 0; t < 2000; ++t) {
    const std::size_t dim = 1 + rng.index(16);
    std::vector<double> r(dim);
    std::vector<double> f(dim);
    for (auto& v : r) v = rng.normal() * 5.0;
    for (auto& v : f) v = rng.normal() * 5.0;
    const double alpha = rng.uniform(0.5, 1.0);
    const auto m = blend(r, f, alpha);
    for (std::size_t k = 0; k < dim; ++k) {
      REQUIRE(m[k] >= std::min(r[k], f[k]) - 1e-12);
      REQUIRE(m[k] <= std::max(r[k], f[k]) + 1e-12);
    }
    REQUIRE(norm(m) <= std::max(norm(r), norm(f)) + 1e-12);
  }
}

TEST_CASE("pair-every-fake plan consumes every fake once") {
  const auto view = view_of(100, 40);
  AlphaSampler s(0.8, 1);
  const auto plan = build_plan(view, s, PairingPolicy::kPairEveryFake, 77);
  CHECK(plan.pairs.size() == 40);
  CHECK(plan.unblended_reals == view.reals);
  std::vector<std::size_t> used;
  for (const auto& p : plan.pairs) {
    used.push_back(p.fake_index);
    CHECK(p.real_index < 100);
    CHECK(p.alpha >= 0.5);
    CHECK(p.alpha < 0.8);
  }
  CHECK(used == view.fakes);
}

TEST_CASE("random-relabel plan partitions the reals") {
  const auto view = view_of(10000, 30);
  AlphaSampler s(0.8, 2);
  const auto plan = build_plan(view, s, PairingPolicy::kRandomRelabel, 12);
  CHECK(plan.pairs.size() + plan.unblended_reals.size() == 10000);
  std::vector<std::size_t> reals = plan.unblended_reals;
  for (const auto& p : plan.pairs) {
    reals.push_back(p.real_index);
    CHECK(p.fake_index >= 10000);
  }
  std::sort(reals.begin(), reals.end());
  CHECK(reals == view.reals);
  const double blended = static_cast<double>(plan.pairs.size()) / 10000.0;
  CHECK(std::abs(blended - 0.5) < 0.02);
}

TEST_CASE("plans are deterministic in their seeds") {
  const auto view = view_of(50, 20);
  for (auto policy : {PairingPolicy::kPairEveryFake, PairingPolicy::kRandomRelabel}) {
    AlphaSampler a(0.8, 9);
    AlphaSampler b(0.8, 9);
    CHECK(build_plan(view, a, policy, 4) == build_plan(view, b, policy, 4));
    AlphaSampler c(0.8, 9);
    AlphaSampler d(0.8, 9);
    CHECK_FALSE(build_plan(view, c, policy, 4) == build_plan(view, d, policy, 5));
  }
}

TEST_CASE("plans need both classes") {
  AlphaSampler s(0.8, 0);
  CHECK_THROWS_AS(build_plan(view_of(0, 3), s, PairingPolicy::kPairEveryFake, 0), ConfigError);
  CHECK_THROWS_AS(build_plan(view_of(3, 0), s, PairingPolicy::kRandomRelabel, 0), ConfigError);
}

TEST_CASE("pairing policy names") {
  CHECK(to_string(PairingPolicy::kPairEveryFake) == "pair_every_fake");
  CHECK(pairing_policy_from_string("random_relabel") == PairingPolicy::kRandomRelabel);
  CHECK_THROWS_AS(pairing_policy_from_string("shuffle"), ConfigError);
}
