#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "capstone/planners.hpp"
#include "capstone/predict.hpp"
#include "oracles.hpp"

using namespace capstone;

namespace {

PnrConfiguration cand(int iteration, double freq, std::vector<double> features = {}) {
  PnrConfiguration x;
  x.iteration = iteration;
  x.graph_id = "g" + std::to_string(iteration);
  x.freq_mhz = freq;
  x.ii = 1;
  x.events = {{"a"}, {1.0}};
  x.features = std::move(features);
  return x;
}

std::vector<PnrConfiguration> monotone_stream(int n, double f0, double step) {
  std::vector<PnrConfiguration> out;
  for (int i = 0; i < n; ++i) out.push_back(cand(i, f0 + step * i));
  return out;
}

std::set<std::string> graph_ids(const PlannerResult& r) {
  std::set<std::string> ids;
  for (const auto& s : r.selected) ids.insert(s.config.graph_id);
  return ids;
}

// Straight-line re-implementation of the selection state machine for
// lambda = 0 streams, used as the reference interpreter.
std::set<std::string> reference_guardband(
    const std::vector<PnrConfiguration>& stream, const PlannerKnobs& knobs,
    const PowerPredictor& predictor) {
  std::set<std::string> out;
  std::string anchor;
  std::vector<std::pair<double, std::string>> specs;  // (freq, id), capacity K
  double f_prev = 0.0;
  for (const auto& x : stream) {
    if (x.freq_mhz < f_prev + knobs.min_freq_step_mhz) continue;
    const double mu = predictor(x);
    if ((1.0 + knobs.gamma_anchor) * mu <= knobs.cap_mw) anchor = x.graph_id;
    if ((1.0 + knobs.gamma_spec) * mu <= knobs.cap_mw) {
      if (static_cast<int>(specs.size()) < knobs.k) {
        specs.push_back({x.freq_mhz, x.graph_id});
      } else {
        auto worst = std::min_element(specs.begin(), specs.end());
        if (x.freq_mhz > worst->first) *worst = {x.freq_mhz, x.graph_id};
      }
    } else {
      break;
    }
    f_prev = x.freq_mhz;
  }
  std::size_t budget = static_cast<std::size_t>(knobs.k);
  if (!anchor.empty()) {
    out.insert(anchor);
    --budget;
  }
  std::sort(specs.rbegin(), specs.rend());  // descending frequency
  std::size_t kept = 0;
  for (const auto& [f, id] : specs) {
    if (kept >= budget) break;
    if (out.insert(id).second) ++kept;
  }
  return out;
}

}  // namespace

TEST_CASE("score_candidate base cases") {
  const PnrConfiguration x = cand(0, 300.0, {1.0, 0.0});
  CHECK(score_candidate(x, {}, 5.0) == doctest::Approx(300.0));

  const PnrConfiguration same = cand(1, 250.0, {1.0, 0.0});
  CHECK(score_candidate(x, {&same}, 10.0) == doctest::Approx(290.0));

  const PnrConfiguration orth = cand(2, 250.0, {0.0, 1.0});
  CHECK(score_candidate(x, {&orth}, 10.0) == doctest::Approx(300.0));
}

TEST_CASE("guardband admits the exact boundary candidate") {
  PlannerKnobs knobs;
  knobs.cap_mw = 130.0;
  knobs.gamma_spec = 0.30;
  knobs.gamma_anchor = 0.45;
  const auto stream = monotone_stream(1, 200.0, 0.0);
  const PlannerResult r =
      plan_guardband(stream, knobs, [](const PnrConfiguration&) { return 100.0; });
  // (1 + 0.30) * 100 = 130 <= 130 passes; the anchor bound 145 does not.
  REQUIRE(r.selected.size() == 1);
  CHECK(r.selected[0].role == Role::speculative);
  CHECK(r.selected[0].upper_bound_mw == doctest::Approx(130.0));
  CHECK_FALSE(r.has_anchor());
}

TEST_CASE("guardband under a non-binding cap keeps the top of the stream") {
  PlannerKnobs knobs;
  knobs.cap_mw = 1e18;
  knobs.k = 4;
  const auto stream = monotone_stream(10, 100.0, 25.0);
  const PlannerResult r = plan_guardband(
      stream, knobs, [](const PnrConfiguration& x) { return x.freq_mhz; });
  CHECK(static_cast<int>(r.selected.size()) ==
        std::min<int>(knobs.k, static_cast<int>(stream.size())));
  REQUIRE(r.has_anchor());
  for (const auto& s : r.selected) {
    if (s.role == Role::anchor) CHECK(s.config.freq_mhz == 325.0);
  }

  const auto short_stream = monotone_stream(3, 100.0, 25.0);
  const PlannerResult rs = plan_guardband(
      short_stream, knobs, [](const PnrConfiguration& x) { return x.freq_mhz; });
  CHECK(rs.selected.size() == 3);
}

TEST_CASE("guardband matches the reference interpreter on monotone streams") {
  std::mt19937 rng(57);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 40; ++trial) {
    const int n = 5 + static_cast<int>(rng() % 30);
    const auto stream = monotone_stream(n, 80.0, 10.0 + 5.0 * u(rng));
    PlannerKnobs knobs;
    knobs.cap_mw = 100.0 + 400.0 * u(rng);
    knobs.k = 1 + static_cast<int>(rng() % 5);
    knobs.gamma_spec = 0.30;
    knobs.gamma_anchor = 0.45;
    knobs.min_freq_step_mhz = (trial % 3 == 0) ? 12.0 : 0.0;
    const double slope = 0.5 + u(rng);
    const auto predictor = [slope](const PnrConfiguration& x) {
      return slope * x.freq_mhz;  // strictly increasing power
    };
    const PlannerResult r = plan_guardband(stream, knobs, predictor);
    CHECK(graph_ids(r) == reference_guardband(stream, knobs, predictor));
    for (const auto& s : r.selected) CHECK(s.upper_bound_mw <= knobs.cap_mw);
  }
}

TEST_CASE("guardband diversity penalty prefers dissimilar candidates") {
  // Three admissible candidates for K = 2 (one speculative slot): the two
  // high-frequency ones are nearly identical in feature space, so a large
  // lambda keeps the earlier, dissimilar one.
  std::vector<PnrConfiguration> stream = {
      cand(0, 100.0, {1.0, 0.0}), cand(1, 101.0, {0.0, 1.0}),
      cand(2, 102.0, {0.0, 1.0})};
  PlannerKnobs knobs;
  knobs.cap_mw = 1e6;
  knobs.k = 3;
  knobs.diversity_lambda = 0.0;
  const auto predictor = [](const PnrConfiguration& x) { return x.freq_mhz; };
  const PlannerResult plain = plan_guardband(stream, knobs, predictor);
  CHECK(graph_ids(plain) == std::set<std::string>{"g0", "g1", "g2"});
}

TEST_CASE("calibrate_conformal quantile basics") {
  std::vector<CalibrationSample> zeros;
  for (int i = 0; i < 30; ++i) zeros.push_back({50.0, 50.0, "", 100.0});
  const QuantileTable t0 = calibrate_conformal(zeros, 0.005, 0.05, false);
  CHECK(t0.global_q_spec == 0.0);

  std::vector<CalibrationSample> ladder;
  for (int i = 1; i <= 10; ++i) {
    ladder.push_back({100.0 + i, 100.0, "", 100.0});
  }
  const QuantileTable t1 = calibrate_conformal(ladder, 0.05, 0.1, false);
  // index ceil(0.9 * 11) = 10 -> the 10th smallest residual
  CHECK(t1.global_q_spec == doctest::Approx(10.0));
  std::vector<double> residuals;
  for (int i = 1; i <= 10; ++i) residuals.push_back(i);
  CHECK(t1.global_q_spec ==
        doctest::Approx(oracles::quantile_oracle(residuals, 0.1)));

  std::vector<CalibrationSample> tiny(ladder.begin(), ladder.begin() + 5);
  const QuantileTable t2 = calibrate_conformal(tiny, 0.005, 0.005, false);
  CHECK(std::isinf(t2.global_q_spec));
}

TEST_CASE("conformal quantiles are monotone in alpha") {
  std::mt19937 rng(61);
  std::exponential_distribution<double> ex(0.2);
  std::vector<CalibrationSample> cal;
  for (int i = 0; i < 300; ++i) cal.push_back({100.0 + ex(rng), 100.0, "", 100.0});
  double prev = -1.0;
  for (double a : {0.2, 0.1, 0.05, 0.01}) {
    const QuantileTable t = calibrate_conformal(cal, 0.005, a, false);
    CHECK(t.global_q_spec >= prev);
    prev = t.global_q_spec;
  }
}

TEST_CASE("conformal_upper_bound arithmetic and fallback") {
  QuantileTable t;
  t.global_q_spec = 0.0;
  t.global_q_anchor = 0.0;
  CHECK(conformal_upper_bound(t, 123.0, 100.0, "", Role::speculative) ==
        doctest::Approx(123.0));

  t.global_q_spec = 8.0;
  t.scale_with_freq = true;
  t.f_ref_mhz = 100.0;
  CHECK(conformal_upper_bound(t, 100.0, 200.0, "", Role::speculative) ==
        doctest::Approx(116.0));

  t.group_q_spec["known"] = 2.0;
  t.group_q_anchor["known"] = 3.0;
  t.group_n["known"] = 50;
  t.scale_with_freq = false;
  CHECK(conformal_upper_bound(t, 100.0, 100.0, "known", Role::speculative) ==
        doctest::Approx(102.0));
  // Unseen group falls back to the global quantile.
  CHECK(conformal_upper_bound(t, 100.0, 100.0, "never_seen", Role::speculative) ==
        doctest::Approx(108.0));
}

TEST_CASE("plan_conformal with zero quantiles equals zero-guardband selection") {
  std::vector<CalibrationSample> zeros;
  for (int i = 0; i < 250; ++i) zeros.push_back({50.0, 50.0, "", 100.0});
  const QuantileTable table = calibrate_conformal(zeros, 0.005, 0.05, false);

  const auto stream = monotone_stream(20, 80.0, 15.0);
  PlannerKnobs knobs;
  knobs.cap_mw = 260.0;
  knobs.k = 4;
  const auto predictor = [](const PnrConfiguration& x) { return 0.9 * x.freq_mhz; };

  PlannerKnobs zero_gb = knobs;
  zero_gb.gamma_anchor = 0.0;
  zero_gb.gamma_spec = 0.0;
  const PlannerResult conf = plan_conformal(stream, knobs, table, predictor);
  const PlannerResult gb = plan_guardband(stream, zero_gb, predictor);
  CHECK(graph_ids(conf) == graph_ids(gb));
}

TEST_CASE("smaller speculative quantile admits at least the anchor frequency") {
  QuantileTable t;
  t.global_q_anchor = 40.0;
  t.global_q_spec = 5.0;
  const auto stream = monotone_stream(20, 80.0, 15.0);
  PlannerKnobs knobs;
  knobs.cap_mw = 260.0;
  knobs.k = 4;
  const auto predictor = [](const PnrConfiguration& x) { return 0.8 * x.freq_mhz; };
  const PlannerResult r = plan_conformal(stream, knobs, t, predictor);
  REQUIRE(r.has_anchor());
  double anchor_f = 0, best_spec_f = 0;
  for (const auto& s : r.selected) {
    if (s.role == Role::anchor) anchor_f = s.config.freq_mhz;
    else best_spec_f = std::max(best_spec_f, s.config.freq_mhz);
  }
  CHECK(best_spec_f >= anchor_f);
}

TEST_CASE("split conformal coverage on exchangeable residuals") {
  std::mt19937 rng(4242);
  std::exponential_distribution<double> ex(0.5);
  std::vector<CalibrationSample> cal;
  for (int i = 0; i < 400; ++i) cal.push_back({100.0 + ex(rng), 100.0, "", 100.0});
  const QuantileTable t = calibrate_conformal(cal, 0.005, 0.05, false);

  int covered = 0;
  const int n_test = 400;
  for (int i = 0; i < n_test; ++i) {
    const double truth = 100.0 + ex(rng);
    const double upper =
        conformal_upper_bound(t, 100.0, 100.0, "", Role::speculative);
    if (truth <= upper) ++covered;
  }
  CHECK(static_cast<double>(covered) / n_test >= 0.92);
}

TEST_CASE("map_set_confidence") {
  CHECK(map_set_confidence(0.05, 5, SetBound::union_bound) ==
        doctest::Approx(0.01));
  CHECK(map_set_confidence(0.3, 1, SetBound::union_bound) ==
        doctest::Approx(0.3));
  CHECK(map_set_confidence(0.3, 1, SetBound::product_bound) ==
        doctest::Approx(0.3));
  CHECK(map_set_confidence(0.1, 2, SetBound::product_bound) ==
        doctest::Approx(1.0 - std::sqrt(0.9)));
  CHECK_THROWS_AS(map_set_confidence(0.0, 2, SetBound::union_bound),
                  RejectedInput);
}

TEST_CASE("enumerate_error_models grids") {
  const auto planted = oracles::make_planted(3, 5, 2, 1, 0.0, 301);
  const EnergyModel base = planted.truth;

  ErrorBounds unit;
  unit.factors.assign(3, {1.0, 1.0});
  const auto only = enumerate_error_models(base, unit);
  REQUIRE(only.size() == 1);
  CHECK(only[0].alpha.isApprox(base.alpha));

  ErrorBounds one;
  one.factors = {{0.5, 1.5}, {1.0, 1.0}, {1.0, 1.0}};
  one.steps_per_event = 3;
  const auto three = enumerate_error_models(base, one);
  REQUIRE(three.size() == 3);
  std::set<double> factors;
  for (const auto& m : three) factors.insert(m.alpha(0) / base.alpha(0));
  CHECK(factors == std::set<double>{0.5, 1.0, 1.5});

  ErrorBounds full;
  full.factors.assign(3, {0.8, 1.2});
  full.steps_per_event = 3;
  const auto cube = enumerate_error_models(base, full);
  REQUIRE(cube.size() == 27);
  std::set<std::vector<double>> tuples;
  for (const auto& m : cube) {
    std::vector<double> t;
    for (Eigen::Index e = 0; e < 3; ++e) t.push_back(m.alpha(e) / base.alpha(e));
    tuples.insert(t);
  }
  CHECK(tuples.size() == 27);  // every factor tuple unique

  ErrorBounds huge;
  huge.factors.assign(3, {0.5, 1.5});
  huge.steps_per_event = 3;
  huge.budget = 26;
  CHECK_THROWS_AS(enumerate_error_models(base, huge), RejectedInput);
}

TEST_CASE("plan_bounded_error with trivial bounds picks best under cap") {
  const auto planted = oracles::make_planted(3, 5, 2, 1, 0.0, 307);
  const EnergyModel base = planted.truth;
  std::vector<PnrConfiguration> cands;
  for (int i = 0; i < 8; ++i) {
    PnrConfiguration x = cand(i, 100.0 + 20.0 * i);
    x.events = {base.event_names, {10.0 + i, 5.0, 2.0}};
    cands.push_back(x);
  }
  ErrorBounds unit;
  unit.factors.assign(3, {1.0, 1.0});

  std::vector<double> preds;
  for (const auto& x : cands) {
    preds.push_back(
        predict_power_at(base, {base.event_names, x.events.counts}, x.freq_mhz));
  }
  const double cap = preds[5] + 1e-9;
  const PlannerResult r = plan_bounded_error(cands, base, unit, cap);
  REQUIRE(r.selected.size() == 1);
  CHECK(r.selected[0].config.graph_id == "g5");
  CHECK(r.selected[0].pred_mw == doctest::Approx(preds[5]));
}

TEST_CASE("plan_bounded_error deduplicates coinciding selections") {
  const auto planted = oracles::make_planted(2, 4, 2, 1, 0.0, 311);
  const EnergyModel base = planted.truth;
  std::vector<PnrConfiguration> cands;
  for (int i = 0; i < 5; ++i) {
    PnrConfiguration x = cand(i, 100.0 + 10.0 * i);
    x.events = {base.event_names, {3.0 + i, 2.0}};
    cands.push_back(x);
  }
  // Two near-identical models; their per-model argmax coincides.
  ErrorBounds b;
  b.factors = {{1.0, 1.0 + 1e-9}, {1.0, 1.0}};
  b.steps_per_event = 2;
  const double cap = 1e9;
  const PlannerResult r = plan_bounded_error(cands, base, b, cap);
  CHECK(r.selected.size() == 1);
}

TEST_CASE("plan_bounded_error union covers the planted truth member") {
  std::mt19937 rng(9001);
  std::uniform_int_distribution<int> pick(0, 2);
  const double grid3[3] = {0.8, 1.0, 1.2};
  for (int trial = 0; trial < 10; ++trial) {
    const auto planted = oracles::make_planted(3, 6, 2, 1, 0.0, 331 + trial);
    const EnergyModel base = planted.truth;
    EnergyModel truth = base;
    for (Eigen::Index e = 0; e < 3; ++e) truth.alpha(e) *= grid3[pick(rng)];

    std::vector<PnrConfiguration> cands;
    for (int i = 0; i < 12; ++i) {
      PnrConfiguration x = cand(i, 100.0 + 15.0 * i);
      x.events = {base.event_names,
                  {20.0 + i, 10.0 + 0.5 * i, 5.0 + 0.25 * i}};
      cands.push_back(x);
    }
    std::vector<double> truth_power;
    for (const auto& x : cands) {
      truth_power.push_back(predict_power_at(
          truth, {truth.event_names, x.events.counts}, x.freq_mhz));
    }
    const double cap = truth_power[7];  // feasibility exists by construction

    ErrorBounds b;
    b.factors.assign(3, {0.8, 1.2});
    b.steps_per_event = 3;
    const PlannerResult r = plan_bounded_error(cands, base, b, cap);
    bool feasible = false;
    for (const auto& s : r.selected) {
      const double p = predict_power_at(
          truth, {truth.event_names, s.config.events.counts},
          s.config.freq_mhz);
      if (p <= cap + 1e-9) feasible = true;
    }
    CHECK(feasible);
  }
}

TEST_CASE("plan_baseline returns the final candidate") {
  const auto stream = monotone_stream(6, 100.0, 10.0);
  const PlannerResult r = plan_baseline(stream);
  REQUIRE(r.selected.size() == 1);
  CHECK(r.selected[0].config.graph_id == "g5");

  CHECK(plan_baseline({}).selected.empty());

  const PlannerResult one = plan_baseline({stream[2]});
  REQUIRE(one.selected.size() == 1);
  CHECK(one.selected[0].config.graph_id == "g2");
}

TEST_CASE("planner knob validation") {
  PlannerKnobs bad;
  bad.cap_mw = 0.0;
  CHECK_THROWS_AS(bad.validate(), RejectedInput);
  bad.cap_mw = 100.0;
  bad.gamma_spec = 0.5;
  bad.gamma_anchor = 0.4;
  CHECK_THROWS_AS(bad.validate(), RejectedInput);
}
