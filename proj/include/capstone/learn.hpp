#pragma once

#include <utility>
#include <vector>

#include "capstone/core.hpp"

namespace capstone {

struct FitOptions {
  double lambda_w = 0.0;      // l1 weight on W
  double lambda_alpha = 0.0;  // l2 weight on alpha
  int max_outer_iters = 200;
  double rel_tol = 1e-6;
  int patience = 5;  // outer iterations without improvement before stopping
  long seed = 0;
  bool fit_leakage = false;

  void validate() const;
};

struct FitReport {
  std::vector<double> objective_trace;
  bool converged = false;
  int iters_used = 0;
};

// Uniform W (1/R per entry), alpha from an NNLS fit of event counts to total
// power. With fit_leakage, leak starts at the minimum observed total and is
// subtracted from the targets.
EnergyModel init_model(const std::vector<ActivitySample>& samples,
                       const FitOptions& options);

// Alternating nonnegative fit against row-level supervision: W rows by NNLS
// with the l1 penalty, alpha by nonnegative ridge, until the objective change
// drops below rel_tol. The returned model is in canonical form (unit L1
// columns).
std::pair<EnergyModel, FitReport> fit_hierarchical(
    const std::vector<ActivitySample>& samples, const FitOptions& options);

// Scalar-aggregate baseline: alpha fit to totals only, W implicit uniform.
EnergyModel fit_aggregate(const std::vector<ActivitySample>& samples,
                          const FitOptions& options);

// Grid point minimizing mean held-out total-power MAPE under kernel-wise
// splits. Ties break toward larger lambda_w, then larger lambda_alpha.
std::pair<double, double> select_hyperparameters(
    const std::vector<ActivitySample>& samples,
    const std::vector<std::pair<double, double>>& grid,
    const FitOptions& base_options);

// Runs `steps` alternating outer iterations on the given samples starting
// from `model`. Samples may introduce new events/rows; the model grows with
// uniform columns / zero rows.
EnergyModel warm_start_update(const EnergyModel& model,
                              const std::vector<ActivitySample>& samples,
                              int steps, const FitOptions& options);

// Scales every nonzero column of W to unit L1 norm, folding the scale into
// alpha. Predictions are unchanged.
EnergyModel rescale_columns(EnergyModel model);

// Row-supervision objective: sum_k ||y - yhat||^2 + lw*||W||_1 + la*||a||^2.
double fit_objective(const EnergyModel& model,
                     const std::vector<ActivitySample>& samples,
                     double lambda_w, double lambda_alpha);

}  // namespace capstone
