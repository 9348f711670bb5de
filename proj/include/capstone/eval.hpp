#pragma once

#include <limits>
#include <span>
#include <string>
#include <vector>

#include "capstone/learn.hpp"

namespace capstone {

// Sentinel for R^2 when the truth has no variance and residuals are nonzero.
inline constexpr double kUndefinedR2 = -std::numeric_limits<double>::infinity();

double mape(std::span<const double> pred, std::span<const double> truth);

// 1 - SS_res/SS_tot. Returns 1 when both are zero, kUndefinedR2 when only
// SS_tot is.
double r2(std::span<const double> pred, std::span<const double> truth);

struct KernelEval {
  std::string kernel;
  double loocv_total_mape_pct = 0.0;
  double loocv_r2 = kUndefinedR2;
  double mean_row_l2_mw = 0.0;
};

struct EvalReport {
  std::vector<KernelEval> per_kernel;  // sorted by kernel
  double insample_mape_pct = 0.0;
  // Mean pairwise cosine similarity of vectorized per-fold W matrices.
  double w_stability = 1.0;
};

// Leave-one-kernel-out cross-validation: each fold trains without one kernel
// (all of its variants) and predicts that kernel's totals and rows.
EvalReport loocv(const std::vector<ActivitySample>& samples,
                 const FitOptions& options,
                 ModelKind kind = ModelKind::hierarchical);

}  // namespace capstone
