#include "capstone/solvers.hpp"

#include <cmath>
#include <limits>
#include <vector>

#include "capstone/core.hpp"

namespace capstone {

namespace {

void check_inputs(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                  double penalty) {
  if (A.rows() < 1 || A.cols() < 1) {
    throw RejectedInput("nnls: A must be at least 1x1");
  }
  if (b.size() != A.rows()) {
    throw RejectedInput("nnls: b size does not match A rows");
  }
  if (!A.allFinite() || !b.allFinite() || !std::isfinite(penalty)) {
    throw RejectedInput("nnls: non-finite input");
  }
  if (penalty < 0) throw RejectedInput("nnls: negative penalty");
}

// Solves G_PP z = c_P on the passive set. G is symmetric PSD; a tiny jitter
// keeps the factorization stable when columns are nearly dependent.
Eigen::VectorXd solve_passive(const Eigen::MatrixXd& G, const Eigen::VectorXd& c,
                              const std::vector<int>& passive) {
  const int p = static_cast<int>(passive.size());
  Eigen::MatrixXd Gp(p, p);
  Eigen::VectorXd cp(p);
  for (int i = 0; i < p; ++i) {
    cp(i) = c(passive[i]);
    for (int j = 0; j < p; ++j) Gp(i, j) = G(passive[i], passive[j]);
  }
  Eigen::VectorXd z = Gp.ldlt().solve(cp);
  // Fall back to a jittered system only when the plain factorization fails,
  // so well-posed cases (identity designs) stay exact.
  const double scale = 1.0 + cp.cwiseAbs().maxCoeff();
  if (!z.allFinite() || (Gp * z - cp).cwiseAbs().maxCoeff() > 1e-8 * scale) {
    Eigen::MatrixXd Gj = Gp;
    Gj.diagonal().array() += 1e-12 * (1.0 + Gp.diagonal().maxCoeff());
    z = Gj.ldlt().solve(cp);
  }
  return z;
}

}  // namespace

Eigen::VectorXd nnls_solve(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                           double l1_penalty) {
  check_inputs(A, b, l1_penalty);
  const int n = static_cast<int>(A.cols());

  const Eigen::MatrixXd G = A.transpose() * A;
  // Half-gradient linear term: c = A'b - l1/2.
  const Eigen::VectorXd c =
      (A.transpose() * b).array() - 0.5 * l1_penalty;

  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  std::vector<bool> in_passive(n, false);
  std::vector<int> passive;

  const double tol = 1e-10 * (1.0 + c.cwiseAbs().maxCoeff());
  const int max_iter = 3 * n + 30;

  for (int iter = 0; iter < max_iter; ++iter) {
    // w = c - Gx is the negative half-gradient.
    Eigen::VectorXd w = c - G * x;
    int best = -1;
    double best_w = tol;
    for (int j = 0; j < n; ++j) {
      if (!in_passive[j] && w(j) > best_w) {
        best_w = w(j);
        best = j;
      }
    }
    if (best < 0) break;  // KKT satisfied
    in_passive[best] = true;
    passive.push_back(best);

    // Inner loop: restore feasibility of the passive-set solution.
    while (true) {
      Eigen::VectorXd z = solve_passive(G, c, passive);
      double min_z = std::numeric_limits<double>::infinity();
      for (int i = 0; i < static_cast<int>(passive.size()); ++i) {
        min_z = std::min(min_z, z(i));
      }
      if (min_z > 0) {
        for (int i = 0; i < static_cast<int>(passive.size()); ++i) {
          x(passive[i]) = z(i);
        }
        break;
      }
      double step = 1.0;
      for (int i = 0; i < static_cast<int>(passive.size()); ++i) {
        const int j = passive[i];
        if (z(i) <= 0 && x(j) > z(i)) {
          step = std::min(step, x(j) / (x(j) - z(i)));
        }
      }
      std::vector<int> kept;
      for (int i = 0; i < static_cast<int>(passive.size()); ++i) {
        const int j = passive[i];
        x(j) += step * (z(i) - x(j));
        if (x(j) > 1e-14) {
          kept.push_back(j);
        } else {
          x(j) = 0.0;
          in_passive[j] = false;
        }
      }
      passive = std::move(kept);
      if (passive.empty()) break;
    }
  }
  return x.cwiseMax(0.0);
}

Eigen::VectorXd ridge_nonneg_solve(const Eigen::MatrixXd& A,
                                   const Eigen::VectorXd& b,
                                   double l2_penalty) {
  check_inputs(A, b, l2_penalty);
  if (l2_penalty == 0.0) return nnls_solve(A, b, 0.0);
  const int m = static_cast<int>(A.rows());
  const int n = static_cast<int>(A.cols());
  Eigen::MatrixXd Aug(m + n, n);
  Aug.topRows(m) = A;
  Aug.bottomRows(n) =
      std::sqrt(l2_penalty) * Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd baug = Eigen::VectorXd::Zero(m + n);
  baug.head(m) = b;
  return nnls_solve(Aug, baug, 0.0);
}

double nnls_kkt_residual(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                         double l1_penalty, const Eigen::VectorXd& x) {
  const Eigen::VectorXd grad =
      (2.0 * (A.transpose() * (A * x - b))).array() + l1_penalty;
  double res = 0.0;
  for (int j = 0; j < x.size(); ++j) {
    if (x(j) > 0) {
      res = std::max(res, std::abs(grad(j)));
    } else {
      res = std::max(res, std::max(0.0, -grad(j)));
    }
  }
  return res;
}

}  // namespace capstone
