#include <doctest.h>

#include <random>

#include "capstone/eval.hpp"
#include "capstone/predict.hpp"
#include "oracles.hpp"

using namespace capstone;

TEST_CASE("mape basic values") {
  CHECK(mape(std::vector<double>{100.0}, std::vector<double>{100.0}) == 0.0);
  CHECK(mape(std::vector<double>{110.0}, std::vector<double>{100.0}) ==
        doctest::Approx(10.0));
  CHECK(mape(std::vector<double>{90.0, 120.0},
             std::vector<double>{100.0, 100.0}) == doctest::Approx(15.0));
}

TEST_CASE("mape rejects nonpositive truth") {
  CHECK_THROWS_AS(mape(std::vector<double>{1.0}, std::vector<double>{0.0}),
                  RejectedInput);
}

TEST_CASE("r2 boundary values") {
  const std::vector<double> truth = {1.0, 2.0, 3.0};
  CHECK(r2(truth, truth) == doctest::Approx(1.0));
  CHECK(r2(std::vector<double>{2.0, 2.0, 2.0}, truth) == doctest::Approx(0.0));
  // Constant truth with nonzero residuals is undefined.
  CHECK(r2(std::vector<double>{1.0, 2.0}, std::vector<double>{3.0, 3.0}) ==
        kUndefinedR2);
}

TEST_CASE("r2 matches the textbook formula on random data") {
  std::mt19937 rng(43);
  std::normal_distribution<double> g(10.0, 2.0);
  std::vector<double> pred, truth;
  for (int i = 0; i < 50; ++i) {
    const double t = g(rng);
    truth.push_back(t);
    pred.push_back(t + 0.3 * g(rng) - 3.0);
  }
  CHECK(r2(pred, truth) ==
        doctest::Approx(oracles::textbook_r2(pred, truth)).epsilon(1e-12));
}

TEST_CASE("loocv on noiseless planted data generalizes across kernels") {
  // Each fold trains on one kernel's variants alone, so it needs at least E
  // samples to pin down the R x E effective matrix.
  const auto planted =
      oracles::make_planted(3, 8, 2, 5, 0.0, 211, /*iid_counts=*/true);
  const EvalReport rep = loocv(planted.samples, {});
  REQUIRE(rep.per_kernel.size() == 2);
  for (const auto& k : rep.per_kernel) {
    CHECK(k.loocv_total_mape_pct < 1.0);
  }
  CHECK(rep.insample_mape_pct < 1.0);
}

TEST_CASE("loocv fold models are stable on planted data") {
  const auto planted = oracles::make_planted(4, 10, 4, 2, 0.0, 223);
  const EvalReport rep = loocv(planted.samples, {});
  CHECK(rep.w_stability > 0.99);
}

TEST_CASE("loocv reports per-kernel rows sorted by kernel") {
  const auto planted = oracles::make_planted(3, 6, 4, 1, 0.02, 227);
  const EvalReport rep = loocv(planted.samples, {});
  REQUIRE(rep.per_kernel.size() == 4);
  for (std::size_t i = 1; i < rep.per_kernel.size(); ++i) {
    CHECK(rep.per_kernel[i - 1].kernel < rep.per_kernel[i].kernel);
  }
}

TEST_CASE("loocv requires at least two kernels") {
  const auto planted = oracles::make_planted(3, 4, 1, 3, 0.0, 229);
  CHECK_THROWS_AS(loocv(planted.samples, {}), RejectedInput);
}

TEST_CASE("noisy-data error stays in a realistic range") {
  // Orientation check against reported silicon-scale error: with substantial
  // noise the aggregate model degrades but remains a usable signal. No tight
  // tolerance, only sanity bounds.
  const auto planted = oracles::make_planted(6, 20, 6, 2, 0.30, 233);
  const EvalReport agg = loocv(planted.samples, {}, ModelKind::aggregate);
  double mean = 0;
  for (const auto& k : agg.per_kernel) mean += k.loocv_total_mape_pct;
  mean /= static_cast<double>(agg.per_kernel.size());
  MESSAGE("aggregate LOOCV MAPE at 30% row noise: ", mean, "%");
  CHECK(mean > 0.0);
  CHECK(mean < 100.0);
}
