#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lbr/error.hpp"
#include "lbr/metrics.hpp"
#include "support/benchmark_tables.hpp"
#include "support/fixtures.hpp"
#include "support/reference_mlp.hpp"

using namespace lbr;
using test::record;

namespace {

// Independent two-pass sample statistics.
double sample_mean(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}
double sample_std(const std::vector<double>& v) {
  const double m = sample_mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

/// TEST reals {-1,-1,-1,+1}; gen1 TEST fakes {+1,+1,-1}; gen2 TEST fake {+1};
/// gen3 only has a TRAIN fake. A TRAIN real sits at +5.
EmbeddingStore toy_store() {
  EmbeddingStore s;
  s.manifest = test::simple_manifest(1, 3);
  for (float v : {-1.0f, -1.0f, -1.0f, 1.0f}) s.records.push_back(record({v}, Label::kReal, 0, Split::kTest));
  for (float v : {1.0f, 1.0f, -1.0f}) s.records.push_back(record({v}, Label::kFake, 1, Split::kTest));
  s.records.push_back(record({1.0f}, Label::kFake, 2, Split::kTest));
  s.records.push_back(record({1.0f}, Label::kFake, 3, Split::kTrain));
  s.records.push_back(record({5.0f}, Label::kReal, 0, Split::kTrain));
  return s;
}

std::vector<std::uint8_t> sign_classifier(const EmbeddingStore& store, std::span<const std::size_t> idx) {
  std::vector<std::uint8_t> out;
  for (auto i : idx) out.push_back(store.records[i].embedding[0] > 0 ? 1 : 0);
  return out;
}

}  // namespace

TEST_CASE("reliability reproduces the published benchmark aggregates") {
  for (const auto& row : test::benchmark_rows()) {
    CAPTURE(row.detector);
    CAPTURE(row.benchmark);
    const auto s = reliability(row.accuracies);
    CHECK(s.mean == doctest::Approx(sample_mean(row.accuracies)).epsilon(1e-12));
    CHECK(s.std == doctest::Approx(sample_std(row.accuracies)).epsilon(1e-12));
    CHECK(std::abs(s.mean - row.mean) <= 0.01);
    CHECK(std::abs(s.std - row.std) <= 0.01);
    CHECK(std::abs(s.reliability - row.reliability) <= 0.02);
  }
}

TEST_CASE("worst case over held-out generators") {
  for (const auto& row : test::benchmark_rows()) {
    CAPTURE(row.detector);
    const std::vector<double> held(row.accuracies.begin() + 1, row.accuracies.end());
    CHECK(worst_case(held) == row.worst);
  }
  CHECK_THROWS_AS(worst_case(std::vector<double>{}), DomainError);
}

TEST_CASE("reliability edge cases") {
  CHECK_THROWS_AS(reliability(std::vector<double>{90.0}), DomainError);
  CHECK_THROWS_AS(reliability(std::vector<double>{}), DomainError);
  CHECK(reliability(std::vector<double>{80.0, 80.0}).reliability == INFINITY);
  CHECK(reliability(std::vector<double>{30.0, 30.0}).reliability == -INFINITY);
  CHECK(std::isnan(reliability(std::vector<double>{50.0, 50.0}).reliability));
  CHECK(reliability(std::vector<double>{80.0, 80.0}).std == 0.0);
  const auto two = reliability(std::vector<double>{60.0, 80.0});
  CHECK(two.std == doctest::Approx(std::sqrt(200.0)));
  CHECK(two.reliability == doctest::Approx(20.0 / std::sqrt(200.0)));
}

TEST_CASE("reliability properties") {
  Rng rng(21);
  for (int t = 0; t < 500; ++t) {
    const std::size_t n = 2 + rng.index(14);
    std::vector<double> a(n);
    for (auto& v : a) v = rng.uniform(40.0, 100.0);
    const double base = rng.uniform(0.0, 60.0);
    const auto s = reliability(a, base);
    if (s.std == 0.0) continue;
    // Definition, shift invariance of std, scale behaviour.
    REQUIRE(s.reliability == doctest::Approx((s.mean - base) / s.std));
    std::vector<double> shifted = a;
    for (auto& v : shifted) v += 7.5;
    const auto sh = reliability(shifted, base + 7.5);
    REQUIRE(sh.std == doctest::Approx(s.std));
    REQUIRE(sh.reliability == doctest::Approx(s.reliability));
    // Worst case is a lower bound on the mean and ignores order.
    REQUIRE(worst_case(a) <= s.mean + 1e-12);
    std::vector<double> perm = a;
    rng.shuffle(perm);
    REQUIRE(worst_case(perm) == worst_case(a));
    REQUIRE(reliability(perm, base).mean == doctest::Approx(s.mean));
  }
}

TEST_CASE("hand-counted toy evaluation") {
  const std::vector<EmbeddingStore> stores{toy_store()};
  const auto report = evaluate_with(sign_classifier, stores, EvalOptions{});
  REQUIRE(report.generators.size() == 2);
  const auto& g1 = report.generators[0];
  CHECK(g1.name == "gen1");
  CHECK(g1.n_real == 4);
  CHECK(g1.n_fake == 3);
  CHECK(g1.correct_real == 3);
  CHECK(g1.correct_fake == 2);
  CHECK(g1.overall_accuracy == doctest::Approx(100.0 * 5 / 7));
  CHECK(g1.real_accuracy == doctest::Approx(75.0));
  CHECK(g1.fake_accuracy == doctest::Approx(200.0 / 3));
  CHECK(g1.balanced_accuracy == doctest::Approx((75.0 + 200.0 / 3) / 2));
  CHECK(report.generators[1].overall_accuracy == doctest::Approx(80.0));
  REQUIRE(report.warnings.size() == 1);
  CHECK(report.warnings[0].find("gen3") != std::string::npos);

  const std::vector<double> acc{100.0 * 5 / 7, 80.0};
  CHECK(report.mean_accuracy == doctest::Approx(sample_mean(acc)));
  CHECK(report.std_accuracy == doctest::Approx(sample_std(acc)));
  CHECK(report.worst_case == doctest::Approx(100.0 * 5 / 7));
  CHECK(report.generators[0].store == "store0");
}

TEST_CASE("training generators are excluded from the worst case by default") {
  const std::vector<EmbeddingStore> stores{toy_store()};
  EvalOptions opt;
  opt.training_generators = {"gen1"};
  auto report = evaluate_with(sign_classifier, stores, opt);
  CHECK(report.generators[0].is_training_generator);
  CHECK(report.generators_in_mean == 2);
  CHECK(report.worst_case == doctest::Approx(80.0));

  opt.include_training_in_worst = true;
  CHECK(evaluate_with(sign_classifier, stores, opt).worst_case == doctest::Approx(100.0 * 5 / 7));

  // One generator left in the mean: std and reliability are undefined.
  opt.include_training_in_mean = false;
  report = evaluate_with(sign_classifier, stores, opt);
  CHECK(report.generators_in_mean == 1);
  CHECK(report.mean_accuracy == doctest::Approx(80.0));
  CHECK(std::isnan(report.std_accuracy));
  CHECK(std::isnan(report.reliability));
  CHECK(to_json(report)["aggregate"]["reliability"] == "undefined");
}

TEST_CASE("constant predictors") {
  const std::vector<EmbeddingStore> stores{toy_store()};
  auto all_fake = [](const EmbeddingStore&, std::span<const std::size_t> idx) {
    return std::vector<std::uint8_t>(idx.size(), 1);
  };
  const auto report = evaluate_with(all_fake, stores, EvalOptions{});
  for (const auto& g : report.generators) {
    CHECK(g.real_accuracy == 0.0);
    CHECK(g.fake_accuracy == 100.0);
    CHECK(g.balanced_accuracy == 50.0);
    CHECK(g.overall_accuracy == doctest::Approx(100.0 * g.n_fake / (g.n_fake + g.n_real)));
  }
  auto wrong_size = [](const EmbeddingStore&, std::span<const std::size_t>) {
    return std::vector<std::uint8_t>{1};
  };
  CHECK_THROWS_AS(evaluate_with(wrong_size, stores, EvalOptions{}), ShapeError);
}

TEST_CASE("rows are produced per store and generator") {
  Rng rng(4);
  std::vector<EmbeddingStore> stores;
  for (int i = 0; i < 3; ++i) {
    auto s = test::random_store(rng, 2, 400, 2);
    for (auto& r : s.records) r.split = Split::kTest;
    stores.push_back(std::move(s));
  }
  EvalOptions opt;
  opt.store_names = {"a", "b", "c"};
  const auto report = evaluate_with(sign_classifier, stores, opt);
  CHECK(report.generators.size() == 6);
  CHECK(report.generators[4].store == "c");
  CHECK(report.generators[4].name == "gen1");
}

TEST_CASE("checkpoint evaluation thresholds the sigmoid") {
  // Logit = x: fake iff sigmoid(x) >= threshold.
  Checkpoint ck;
  ck.model = MlpModel::zeros({1, 1});
  ck.model.layers()[0].weight(0, 0) = 1.0;
  ck.meta.training_generators = {"gen2"};
  const std::vector<EmbeddingStore> stores{toy_store()};
  const auto report = evaluate(ck, stores);
  CHECK(report.generators[0].overall_accuracy == doctest::Approx(100.0 * 5 / 7));
  CHECK(report.generators[1].is_training_generator);

  EvalOptions strict;
  strict.threshold = 0.99;  // sigmoid(1) < 0.99, so everything is called real
  const auto all_real = evaluate(ck, stores, strict);
  CHECK(all_real.generators[0].real_accuracy == 100.0);
  CHECK(all_real.generators[0].fake_accuracy == 0.0);

  Checkpoint wide;
  wide.model = MlpModel::zeros({3, 1});
  CHECK_THROWS_AS(evaluate(wide, stores), ShapeError);
}

TEST_CASE("penultimate export") {
  Rng rng(10);
  Checkpoint ck;
  ck.model = test::random_model(rng, {3, 6, 5, 1});
  const auto store = test::random_store(rng, 3, 50);
  const auto out = export_penultimate(ck, store);
  CHECK(out.dimension() == 5);
  CHECK(out.size() == store.size());
  CHECK_NOTHROW(validate(out));
  for (std::size_t i = 0; i < out.size(); ++i) {
    CHECK(out.records[i].label == store.records[i].label);
    CHECK(out.records[i].generator_id == store.records[i].generator_id);
    CHECK(out.records[i].split == store.records[i].split);
    for (float v : out.records[i].embedding) CHECK(v >= 0.0f);
  }
  Checkpoint linear;
  linear.model = MlpModel::zeros({3, 1});
  CHECK_THROWS_AS(export_penultimate(linear, store), ConfigError);
}

TEST_CASE("report formats") {
  const std::vector<EmbeddingStore> stores{toy_store()};
  EvalOptions opt;
  opt.a_base = 60.0;
  const auto report = evaluate_with(sign_classifier, stores, opt);

  const auto text = to_text(report);
  CHECK(text.find("A_base = 60.00") != std::string::npos);
  CHECK(text.find("Reliability") != std::string::npos);
  CHECK(text.find("gen1") != std::string::npos);

  const auto csv = to_csv(report);
  CHECK(csv.rfind("kind,store,generator,training,n_real,n_fake,overall,real,fake,balanced\n", 0) == 0);
  CHECK(csv.find("aggregate,,a_base,,,,60") != std::string::npos);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 2 + 5);

  const auto json = to_json(report);
  CHECK(json["a_base"] == 60.0);
  CHECK(json["generators"].size() == 2);
  CHECK(json["warnings"].size() == 1);
  CHECK(json["aggregate"]["worst_case"].get<double>() == doctest::Approx(100.0 * 5 / 7));
}
