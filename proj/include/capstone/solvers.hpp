#pragma once

#include <Eigen/Dense>

namespace capstone {

// Minimizes ||Ax - b||^2 + l1_penalty * sum(x) subject to x >= 0 using a
// Lawson-Hanson style active set on the normal equations. The l1 term is
// folded into the linear coefficient, which is exact under x >= 0.
Eigen::VectorXd nnls_solve(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                           double l1_penalty = 0.0);

// Minimizes ||Ax - b||^2 + l2_penalty * ||x||^2 subject to x >= 0 via the
// augmented system [A; sqrt(l2) I], [b; 0].
Eigen::VectorXd ridge_nonneg_solve(const Eigen::MatrixXd& A,
                                   const Eigen::VectorXd& b,
                                   double l2_penalty = 0.0);

// Max KKT violation of x for the nnls_solve objective: |grad_j| on the
// support, max(0, -grad_j) at the boundary.
double nnls_kkt_residual(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                         double l1_penalty, const Eigen::VectorXd& x);

}  // namespace capstone
