#pragma once

#include <functional>
#include <vector>

#include "brim/types.hpp"

namespace brim {

struct EigenResult {
  Vector values;   // descending
  Matrix vectors;  // column k pairs with values[k]
};

// Full eigendecomposition of a symmetric matrix. Each eigenvector is signed so
// that its largest-magnitude entry is positive (first such entry on ties).
// Throws ContractError when A is not square or not symmetric to 1e-10 relative.
EigenResult sym_eigen(const Matrix& a);

// Lawson-Hanson active-set solver for min ||Ax - b|| subject to x >= 0.
// Throws ConvergenceError after 10*n outer iterations.
Vector nnls(const Matrix& a, const Vector& b);

// The same problem given G = A^T A and A^T b, for many right-hand sides that
// share A. Negative tol selects 1e-12 * max(|A^T b|, diag G).
Vector nnls_gram(const Matrix& gram, const Vector& atb, double tol = -1.0);

// Unconstrained linear least squares via column-pivoted QR.
Vector least_squares(const Matrix& a, const Vector& b);

using ResidualFn = std::function<Vector(const Vector&)>;
using JacobianFn = std::function<Matrix(const Vector&)>;

struct LmConfig {
  double initial_damping = 1e-6;
  double damping_factor = 10.0;
  double max_damping = 1e16;
  double step_tol = 1e-10;
  double cost_tol = 1e-12;
  int max_iter = 200;
};

struct LmResult {
  Vector params;
  Matrix covariance;  // sigma^2 (J^T J)^-1, sigma^2 = cost / (m - n)
  bool converged = false;
  int iterations = 0;
  int accepted_steps = 0;
  double cost = 0.0;                // sum of squared residuals at params
  std::vector<double> cost_history;  // cost after x0 and after each accepted step
};

// Central-difference Jacobian with step max(1e-6, 1e-6 |x_i|).
Matrix numeric_jacobian(const ResidualFn& residual, const Vector& x);

// Levenberg-Marquardt with Marquardt diagonal scaling. Damping is divided by
// damping_factor after an accepted step and multiplied after a rejected one.
// Pass an empty JacobianFn to use numeric_jacobian.
// Throws SingularMatrixError when J^T J stays singular at max damping or at
// the solution (covariance undefined), DegenerateInputError when the residual
// is not finite at x0.
LmResult lm_fit(const ResidualFn& residual, const JacobianFn& jacobian, const Vector& x0,
                const LmConfig& cfg = {});

}  // namespace brim
