#pragma once

#include <string>
#include <vector>

#include "capstone/planners.hpp"

namespace capstone {

// Synthetic stand-in for the post-PnR pipelining loop: a saturating frequency
// curve with register and interconnect activity growing per iteration.
struct HarnessParams {
  long seed = 1;
  int iterations = 40;
  double f0_mhz = 100.0;
  double f_max_mhz = 500.0;
  double tau = 10.0;  // saturation time constant, in iterations
  EventVector base_events;
  double registers_per_iter = 8.0;
  double interconnect_growth_rate = 0.02;  // relative growth per iteration
  EnergyModel truth_model;
  double noise_rel = 0.0;
  std::string kernel = "kernel";

  void validate() const;
};

// f_t = f0 + (f_max - f0)(1 - exp(-t/tau)); register counts grow linearly,
// interconnect (ic_*) counts by the relative growth rate. Deterministic.
std::vector<PnrConfiguration> generate_pipeline_sequence(
    const HarnessParams& params);

// Truth-model power with bounded uniform relative noise in [-3s, 3s],
// deterministic per (seed, config).
double oracle_power(const EnergyModel& truth_model,
                    const PnrConfiguration& config, double noise_rel,
                    long seed);

// Remaining headroom (C - P)/C * 100.
double delta_cap(double cap_mw, double power_mw);

// Even duty-cycle throttling: frequency and power divided by factor.
std::pair<double, double> throttle(double freq_mhz, double power_mw,
                                   double factor);

struct CellResult {
  std::string kernel;
  double cap_mw = 0.0;
  PlanMode planner = PlanMode::baseline;
  bool success = false;
  double dcap_pct = 0.0;       // valid only when success
  double norm_freq = 0.0;
  int k_returned = 0;
  double chosen_freq_mhz = 0.0;
};

struct EvalSummary {
  PlanMode planner = PlanMode::baseline;
  double success_rate_pct = 0.0;
  double median_dcap_pct = 0.0;
  double p95_dcap_pct = 0.0;
  double avg_norm_freq = 0.0;
  double k_returned = 0.0;  // mean selected-set size
};

// Success when any selected candidate's true power meets the cap; metrics
// come from the highest-frequency truly feasible candidate. Normalized
// frequency falls back to the highest selected frequency when nothing is
// feasible (the baseline row reports 1.0 that way).
CellResult evaluate_planner(const PlannerResult& result,
                            const PowerPredictor& truth_oracle, double cap_mw,
                            double baseline_freq_mhz);

struct SuiteConfig {
  long seed = 7;
  int iterations = 40;
  double noise_rel = 0.05;
  double model_error_rel = 0.12;  // perturbation of the planner's model
  std::vector<double> cap_fractions = {0.35, 0.6, 0.85};
  PlannerKnobs knobs{/*cap placeholder*/ 1.0, 4, 0.45, 0.30, 1.0, 0.0};
  double alpha_anchor = 0.005;
  double alpha_spec = 0.05;
  int calibration_draws = 5;
  double err_lo = 0.8;
  double err_hi = 1.25;
  int err_steps = 3;
};

struct SuiteResult {
  std::vector<CellResult> cells;
  std::vector<EvalSummary> summary;  // one row per planner mode
};

// Shared synthetic truth model over the default event/row vocabulary.
EnergyModel default_truth_model();
std::vector<std::string> default_suite_kernels();
EventVector default_base_events(const std::string& kernel, long seed);

// Full kernels x caps x planners cross product with a hidden noisy oracle.
SuiteResult run_suite(const SuiteConfig& config);

}  // namespace capstone
