#pragma once

#include <vector>

#include "capstone/core.hpp"

namespace capstone {

// Path label used for the synthetic leakage row appended by predict_rows.
inline constexpr const char* kLeakRowPath = "(leakage)";

struct Prediction {
  std::vector<double> rows_mw;  // R entries, plus a leakage row when leak > 0
  double total_mw = 0.0;
  std::vector<double> beta;
};

// beta_e = alpha_e * column sum of W_:e. Equals alpha for canonical models.
Eigen::VectorXd effective_beta(const EnergyModel& model);

// yhat = W diag(alpha) X. Event names/order must match the model exactly.
// When leak_mw > 0 a synthetic leakage row is appended.
std::vector<double> predict_rows(const EnergyModel& model,
                                 const EventVector& events);

// Phat = sum_e beta_e X_e + leak.
double predict_total(const EnergyModel& model, const EventVector& events);

// Dynamic power scaled linearly from the training frequency; leakage is
// frequency-invariant.
double predict_power_at(const EnergyModel& model, const EventVector& events,
                        double freq_mhz);

Prediction predict(const EnergyModel& model, const EventVector& events);

// Re-expresses an arbitrary event vector over the model's event order:
// events unknown to the model are dropped, missing ones become zero. Used by
// cross-validation and the CLI; predict_* themselves require an exact match.
EventVector project_events(const EnergyModel& model, const EventVector& events);

}  // namespace capstone
