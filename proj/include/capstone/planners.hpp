#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "capstone/core.hpp"

namespace capstone {

struct PlannerKnobs {
  double cap_mw = 0.0;
  int k = 4;
  double gamma_anchor = 0.45;
  double gamma_spec = 0.30;
  double diversity_lambda = 0.0;
  double min_freq_step_mhz = 0.0;

  void validate() const;
};

struct CalibrationSample {
  double ptpx_mw = 0.0;
  double pred_mw = 0.0;
  std::string group;
  double freq_mhz = 100.0;
};

// Conservative split-conformal quantiles of the one-sided underestimation
// residuals, per group and global. q is +inf when the group is too small for
// the requested miscoverage level.
struct QuantileTable {
  std::map<std::string, double> group_q_anchor;
  std::map<std::string, double> group_q_spec;
  std::map<std::string, int> group_n;
  double global_q_anchor = 0.0;
  double global_q_spec = 0.0;
  double alpha_anchor = 0.005;
  double alpha_spec = 0.05;
  bool scale_with_freq = false;
  double f_ref_mhz = 100.0;
  int n_min = 20;
};

// Per-event multiplicative error bounds for the bounded-error planner.
struct ErrorBounds {
  std::vector<std::pair<double, double>> factors;  // (lo, hi) per event
  int steps_per_event = 3;
  long budget = 100000;  // max enumerated models

  void validate() const;
};

enum class Role { anchor, speculative };
enum class PlanMode { guardband, conformal, bounded_error, baseline };

const char* to_string(Role role);
const char* to_string(PlanMode mode);

struct SelectedCandidate {
  PnrConfiguration config;
  double pred_mw = 0.0;
  double upper_bound_mw = 0.0;
  Role role = Role::speculative;
};

struct PlannerResult {
  std::vector<SelectedCandidate> selected;
  int stopped_at_iteration = -1;
  PlanMode mode = PlanMode::baseline;
  std::string note;

  bool has_anchor() const;
};

using PowerPredictor = std::function<double(const PnrConfiguration&)>;

// Frequency minus the diversity penalty: f(x) - lambda * sum of cosine
// similarities against the current set. Cosine with a zero vector is 0.
double score_candidate(const PnrConfiguration& x,
                       const std::vector<const PnrConfiguration*>& current_set,
                       double lambda);

// Capstone I: static multiplicative guardbands, anchor plus up to K-1
// speculative candidates, stops at the first candidate whose speculative
// bound exceeds the cap.
PlannerResult plan_guardband(const std::vector<PnrConfiguration>& stream,
                             const PlannerKnobs& knobs,
                             const PowerPredictor& predictor);

QuantileTable calibrate_conformal(const std::vector<CalibrationSample>& cal,
                                  double alpha_anchor, double alpha_spec,
                                  bool scale_with_freq,
                                  double f_ref_mhz = 100.0, int n_min = 20);

double conformal_upper_bound(const QuantileTable& table, double pred_mw,
                             double freq_mhz, const std::string& group,
                             Role mode);

// Capstone II: Algorithm 1 control flow with conformal upper bounds.
PlannerResult plan_conformal(const std::vector<PnrConfiguration>& stream,
                             const PlannerKnobs& knobs,
                             const QuantileTable& table,
                             const PowerPredictor& predictor,
                             const std::string& group = "");

enum class SetBound { union_bound, product_bound };

// Per-candidate miscoverage for a set-level confidence 1 - epsilon.
double map_set_confidence(double epsilon, int k, SetBound mode);

// Cartesian product of per-event factor grids applied to the base model's
// coefficients.
std::vector<EnergyModel> enumerate_error_models(const EnergyModel& base,
                                                const ErrorBounds& bounds);

// Capstone III: per enumerated model, the single candidate maximizing
// predicted power under the cap; union over models, deduplicated.
PlannerResult plan_bounded_error(const std::vector<PnrConfiguration>& candidates,
                                 const EnergyModel& base,
                                 const ErrorBounds& bounds, double cap_mw);

// No-capping baseline: the final (maximum-frequency) candidate.
PlannerResult plan_baseline(const std::vector<PnrConfiguration>& stream);

}  // namespace capstone
