// Independent reference implementations used to cross-check the library:
// slow but simple, no code shared with the implementations under test.

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "capstone/core.hpp"

namespace oracles {

inline double nnls_objective(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                             double l1, const Eigen::VectorXd& x) {
  return (A * x - b).squaredNorm() + l1 * x.sum();
}

// Projected gradient descent on 0.5-free form, step 1/L with L from the
// Gram spectral norm, capped at max_steps with a tight early stop.
inline Eigen::VectorXd projected_gradient_nnls(const Eigen::MatrixXd& A,
                                               const Eigen::VectorXd& b,
                                               double l1,
                                               long max_steps = 100000) {
  const Eigen::MatrixXd G = A.transpose() * A;
  const Eigen::VectorXd c = A.transpose() * b;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G);
  const double L = std::max(2.0 * es.eigenvalues().maxCoeff(), 1e-12);
  const double eta = 1.0 / L;

  Eigen::VectorXd x = Eigen::VectorXd::Zero(A.cols());
  double prev = std::numeric_limits<double>::infinity();
  for (long s = 0; s < max_steps; ++s) {
    const Eigen::VectorXd grad =
        2.0 * (G * x - c) + Eigen::VectorXd::Constant(A.cols(), l1);
    x = (x - eta * grad).cwiseMax(0.0);
    if (s % 64 == 0) {
      const double obj = nnls_objective(A, b, l1, x);
      if (prev - obj < 1e-14 * (1.0 + std::abs(obj))) break;
      prev = obj;
    }
  }
  return x;
}

// Exhaustive active-set search for tiny problems: try every support, solve
// the unconstrained LS on it, keep feasible solutions with the best objective.
inline Eigen::VectorXd exhaustive_nnls(const Eigen::MatrixXd& A,
                                       const Eigen::VectorXd& b, double l1 = 0) {
  const int n = static_cast<int>(A.cols());
  Eigen::VectorXd best = Eigen::VectorXd::Zero(n);
  double best_obj = nnls_objective(A, b, l1, best);
  for (unsigned mask = 1; mask < (1u << n); ++mask) {
    std::vector<int> support;
    for (int j = 0; j < n; ++j) {
      if (mask & (1u << j)) support.push_back(j);
    }
    Eigen::MatrixXd As(A.rows(), static_cast<Eigen::Index>(support.size()));
    for (std::size_t k = 0; k < support.size(); ++k) {
      As.col(static_cast<Eigen::Index>(k)) = A.col(support[k]);
    }
    const Eigen::VectorXd cs =
        As.transpose() * b - 0.5 * l1 * Eigen::VectorXd::Ones(As.cols());
    const Eigen::VectorXd xs =
        (As.transpose() * As).ldlt().solve(cs);
    if ((xs.array() < 0).any()) continue;
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    for (std::size_t k = 0; k < support.size(); ++k) {
      x(support[k]) = xs(static_cast<Eigen::Index>(k));
    }
    const double obj = nnls_objective(A, b, l1, x);
    if (obj < best_obj - 1e-12) {
      best_obj = obj;
      best = x;
    }
  }
  return best;
}

// ceil((1-alpha)(n+1))-th smallest residual, +inf past the sample.
inline double quantile_oracle(std::vector<double> r, double alpha) {
  const long n = static_cast<long>(r.size());
  const long idx = static_cast<long>(
      std::ceil((1.0 - alpha) * static_cast<double>(n + 1)));
  if (idx > n) return std::numeric_limits<double>::infinity();
  std::sort(r.begin(), r.end());
  return r[static_cast<std::size_t>(idx - 1)];
}

// Naive triple-loop yhat = W diag(alpha) X, no leakage row.
inline std::vector<double> dense_rows_oracle(const capstone::EnergyModel& m,
                                             const std::vector<double>& x) {
  std::vector<double> y(m.num_rows(), 0.0);
  for (std::size_t r = 0; r < m.num_rows(); ++r) {
    for (std::size_t e = 0; e < m.num_events(); ++e) {
      y[r] += m.W(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(e)) *
              m.alpha(static_cast<Eigen::Index>(e)) * x[e];
    }
  }
  return y;
}

inline double textbook_r2(const std::vector<double>& pred,
                          const std::vector<double>& truth) {
  double mean = 0;
  for (double t : truth) mean += t;
  mean /= static_cast<double>(truth.size());
  double ss_res = 0, ss_tot = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    ss_res += (truth[i] - pred[i]) * (truth[i] - pred[i]);
    ss_tot += (truth[i] - mean) * (truth[i] - mean);
  }
  return 1.0 - ss_res / ss_tot;
}

// Planted-model dataset: hidden (W*, alpha*) with unit-L1 columns, row
// supervision generated exactly, optional relative row noise. Event counts
// follow a per-kernel profile with per-variant scaling so totals alone are
// poorly conditioned while rows stay informative.
struct Planted {
  capstone::EnergyModel truth;
  std::vector<capstone::ActivitySample> samples;
};

// iid_counts draws every event count independently; the default couples a
// kernel's variants through a shared profile, which keeps totals-only fits
// poorly conditioned. Use iid_counts when a single kernel must identify the
// coefficients on its own.
inline Planted make_planted(int E, int R, int kernels, int variants,
                            double noise_rel, unsigned seed,
                            bool iid_counts = false) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);

  capstone::EnergyModel truth;
  for (int e = 0; e < E; ++e) truth.event_names.push_back("e" + std::to_string(e));
  for (int r = 0; r < R; ++r) {
    std::string label = std::to_string(r);
    if (label.size() < 2) label.insert(0, "0");
    truth.row_paths.push_back("top/u" + label);
  }
  truth.W = Eigen::MatrixXd::Zero(R, E);
  truth.alpha = Eigen::VectorXd::Zero(E);
  for (int e = 0; e < E; ++e) {
    for (int r = 0; r < R; ++r) {
      if (u01(rng) < 0.4) truth.W(r, e) = 0.2 + u01(rng);
    }
    if (truth.W.col(e).sum() == 0) truth.W(rng() % R, e) = 1.0;
    truth.W.col(e) /= truth.W.col(e).lpNorm<1>();
    truth.alpha(e) = 0.05 + 0.95 * u01(rng);
  }
  truth.train_op = {0.8, 100.0, "tt"};

  Planted out;
  out.truth = truth;
  for (int k = 0; k < kernels; ++k) {
    std::vector<double> profile(E);
    for (int e = 0; e < E; ++e) profile[e] = 10.0 + 90.0 * u01(rng);
    for (int v = 0; v < variants; ++v) {
      const double scale = 0.5 + 1.5 * u01(rng);
      capstone::ActivitySample s;
      s.kernel = "k" + std::to_string(k);
      s.variant = "v" + std::to_string(v);
      s.events.names = truth.event_names;
      for (int e = 0; e < E; ++e) {
        s.events.counts.push_back(
            iid_counts ? 10.0 + 90.0 * u01(rng)
                       : profile[e] * scale * (1.0 + 0.05 * (u01(rng) - 0.5)));
      }
      Eigen::Map<const Eigen::VectorXd> x(s.events.counts.data(), E);
      const Eigen::VectorXd y = truth.W * truth.alpha.asDiagonal() * x;
      for (int r = 0; r < R; ++r) {
        double p = y(r);
        if (noise_rel > 0) p *= 1.0 + noise_rel * (2.0 * u01(rng) - 1.0);
        s.report.rows.push_back({truth.row_paths[static_cast<std::size_t>(r)],
                                 std::max(p, 0.0)});
      }
      s.report.op = truth.train_op;
      out.samples.push_back(std::move(s));
    }
  }
  return out;
}

}  // namespace oracles
