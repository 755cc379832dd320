#include "brim/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "brim/error.hpp"

namespace brim {

EigenResult sym_eigen(const Matrix& a) {
  if (a.rows() != a.cols()) throw ContractError("sym_eigen: matrix must be square");
  const Eigen::Index n = a.rows();
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  if ((a - a.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale)
    throw ContractError("sym_eigen: matrix is not symmetric");

  // Eigen returns ascending eigenvalues; reverse into descending order.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(a, Eigen::ComputeEigenvectors);
  if (solver.info() != Eigen::Success) throw ConvergenceError("sym_eigen: eigensolver failed");

  EigenResult out;
  out.values.resize(n);
  out.vectors.resize(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const Eigen::Index src = n - 1 - k;
    out.values[k] = solver.eigenvalues()[src];
    Vector v = solver.eigenvectors().col(src);
    Eigen::Index arg = 0;
    double best = -1.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      // 1e-12 slack keeps the choice stable when two entries tie in magnitude
      if (std::abs(v[i]) > best + 1e-12) {
        best = std::abs(v[i]);
        arg = i;
      }
    }
    if (v[arg] < 0) v = -v;
    out.vectors.col(k) = v;
  }
  return out;
}

Vector least_squares(const Matrix& a, const Vector& b) {
  Eigen::MatrixXd dense = a;
  return dense.colPivHouseholderQr().solve(b);
}

namespace {

// Lawson-Hanson active set. `solve(passive, z)` solves the unconstrained
// problem restricted to the passive set, `gradient(x)` returns A^T (b - A x).
// MaxN bounds the problem size so small problems stay off the heap.
template <int MaxN, typename Solve, typename Gradient>
Vector lawson_hanson(Eigen::Index n, double tol, Solve&& solve, Gradient&& gradient) {
  using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, MaxN, 1>;
  using Flags = Eigen::Matrix<bool, Eigen::Dynamic, 1, 0, MaxN, 1>;
  Vec x = Vec::Zero(n);
  Flags passive = Flags::Constant(n, false);
  Vec w = gradient(x);
  int outer = 0;
  const int max_outer = static_cast<int>(10 * n);
  while (true) {
    Eigen::Index best = -1;
    double best_w = tol;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (!passive[j] && w[j] > best_w) {
        best_w = w[j];
        best = j;
      }
    }
    if (best < 0) break;
    if (++outer > max_outer) throw ConvergenceError("nnls: iteration cap reached");
    passive[best] = true;

    Vec z(n);
    for (int inner = 0;; ++inner) {
      if (inner > 10 * n) throw ConvergenceError("nnls: inner loop did not terminate");
      solve(passive, z);
      bool feasible = true;
      for (Eigen::Index j = 0; j < n; ++j)
        if (passive[j] && z[j] <= 0) feasible = false;
      if (feasible) break;
      double alpha = std::numeric_limits<double>::infinity();
      Eigen::Index blocking = -1;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (passive[j] && z[j] <= 0) {
          const double a = x[j] / (x[j] - z[j]);
          if (a < alpha) {
            alpha = a;
            blocking = j;
          }
        }
      }
      x += alpha * (z - x);
      x[blocking] = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (passive[j] && x[j] <= 0) {
          passive[j] = false;
          x[j] = 0.0;
        }
      }
    }
    x = z;
    w = gradient(x);
    // The entering coordinate can come back with a non-positive gradient when
    // the subproblem is numerically flat; stop instead of cycling.
    if (!passive[best]) break;
  }
  return x.cwiseMax(0.0);
}

template <typename Flags>
std::vector<Eigen::Index> passive_indices(const Flags& passive) {
  std::vector<Eigen::Index> idx;
  for (Eigen::Index j = 0; j < passive.size(); ++j)
    if (passive[j]) idx.push_back(j);
  return idx;
}

template <int MaxN>
Vector nnls_gram_impl(const Matrix& gram, const Vector& atb, double tol) {
  const Eigen::Index n = gram.rows();
  using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, MaxN, MaxN>;
  using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, MaxN, 1>;
  const Mat g = gram;
  const Vec h = atb;
  auto solve = [&](const auto& passive, auto& z) {
    Eigen::Index idx[MaxN == Eigen::Dynamic ? 1 : MaxN];
    std::vector<Eigen::Index> heap;
    Eigen::Index* ip = idx;
    if constexpr (MaxN == Eigen::Dynamic) {
      heap.resize(static_cast<std::size_t>(n));
      ip = heap.data();
    }
    Eigen::Index k = 0;
    for (Eigen::Index j = 0; j < n; ++j)
      if (passive[j]) ip[k++] = j;
    Mat sub(k, k);
    Vec rhs(k);
    for (Eigen::Index r = 0; r < k; ++r) {
      rhs[r] = h[ip[r]];
      for (Eigen::Index c = 0; c < k; ++c) sub(r, c) = g(ip[r], ip[c]);
    }
    const Vec zp = sub.ldlt().solve(rhs);
    z.setZero(n);
    for (Eigen::Index r = 0; r < k; ++r) z[ip[r]] = zp[r];
  };
  auto gradient = [&](const auto& x) -> Vec { return h - g * x; };
  return lawson_hanson<MaxN>(n, tol, solve, gradient);
}

}  // namespace

Vector nnls(const Matrix& a, const Vector& b) {
  const Eigen::Index m = a.rows();
  const Eigen::Index n = a.cols();
  if (m < 1 || n < 1) throw ParameterError("nnls: matrix must be non-empty");
  if (b.size() != m) throw ParameterError("nnls: b length must equal rows of A");

  const Eigen::MatrixXd A = a;
  const double tol = 10.0 * std::numeric_limits<double>::epsilon() * A.cwiseAbs().colwise().sum().maxCoeff() *
                     std::max(b.cwiseAbs().maxCoeff(), 1.0) * static_cast<double>(std::max(m, n));
  auto solve = [&](const auto& passive, auto& z) {
    const auto idx = passive_indices(passive);
    Eigen::MatrixXd sub(m, static_cast<Eigen::Index>(idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k) sub.col(static_cast<Eigen::Index>(k)) = A.col(idx[k]);
    const Vector zp = sub.colPivHouseholderQr().solve(b);
    z.setZero(n);
    for (std::size_t k = 0; k < idx.size(); ++k) z[idx[k]] = zp[static_cast<Eigen::Index>(k)];
  };
  auto gradient = [&](const Vector& x) -> Vector { return A.transpose() * (b - A * x); };
  return lawson_hanson<Eigen::Dynamic>(n, tol, solve, gradient);
}

Vector nnls_gram(const Matrix& gram, const Vector& atb, double tol) {
  const Eigen::Index n = gram.rows();
  if (n < 1 || gram.cols() != n) throw ParameterError("nnls_gram: gram matrix must be square and non-empty");
  if (atb.size() != n) throw ParameterError("nnls_gram: A^T b length must equal the gram size");
  if (tol < 0) tol = 1e-12 * std::max(atb.cwiseAbs().maxCoeff(), gram.diagonal().maxCoeff());
  if (n <= 16) return nnls_gram_impl<16>(gram, atb, tol);
  return nnls_gram_impl<Eigen::Dynamic>(gram, atb, tol);
}

Matrix numeric_jacobian(const ResidualFn& residual, const Vector& x) {
  const Vector r0 = residual(x);
  Matrix jac(r0.size(), x.size());
  Vector xp = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double h = std::max(1e-6, 1e-6 * std::abs(x[i]));
    xp[i] = x[i] + h;
    const Vector rp = residual(xp);
    xp[i] = x[i] - h;
    const Vector rm = residual(xp);
    xp[i] = x[i];
    jac.col(i) = (rp - rm) / (2.0 * h);
  }
  return jac;
}

LmResult lm_fit(const ResidualFn& residual, const JacobianFn& jacobian, const Vector& x0, const LmConfig& cfg) {
  auto jac_at = [&](const Vector& x) -> Matrix { return jacobian ? jacobian(x) : numeric_jacobian(residual, x); };

  LmResult res;
  Vector x = x0;
  Vector r = residual(x);
  if (!r.allFinite()) throw DegenerateInputError("lm_fit: residual is not finite at the initial parameters");
  const Eigen::Index m = r.size();
  const Eigen::Index n = x.size();
  double cost = r.squaredNorm();
  res.cost_history.push_back(cost);

  double lambda = cfg.initial_damping;
  Matrix jac = jac_at(x);
  Eigen::MatrixXd jtj = jac.transpose() * jac;
  Vector grad = jac.transpose() * r;

  for (res.iterations = 0; res.iterations < cfg.max_iter; ++res.iterations) {
    if (grad.cwiseAbs().maxCoeff() == 0.0 || cost == 0.0) {
      res.converged = true;
      break;
    }
    Vector diag = jtj.diagonal();
    const double floor = std::max(diag.maxCoeff(), 1.0) * 1e-15;
    for (Eigen::Index i = 0; i < n; ++i) diag[i] = std::max(diag[i], floor);

    Vector step;
    bool solved = false;
    while (lambda <= cfg.max_damping) {
      Eigen::MatrixXd damped = jtj;
      damped.diagonal() += lambda * diag;
      Eigen::LDLT<Eigen::MatrixXd> ldlt(damped);
      if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
        step = ldlt.solve(-grad);
        if (step.allFinite()) {
          solved = true;
          break;
        }
      }
      lambda *= cfg.damping_factor;
    }
    if (!solved) throw SingularMatrixError("lm_fit: normal matrix singular at maximum damping");

    if (step.norm() <= cfg.step_tol * (x.norm() + cfg.step_tol)) {
      res.converged = true;
      break;
    }
    const Vector x_new = x + step;
    const Vector r_new = residual(x_new);
    const double cost_new = r_new.allFinite() ? r_new.squaredNorm() : std::numeric_limits<double>::infinity();
    if (cost_new < cost) {
      const double rel = (cost - cost_new) / cost;
      x = x_new;
      r = r_new;
      cost = cost_new;
      ++res.accepted_steps;
      res.cost_history.push_back(cost);
      lambda = std::max(lambda / cfg.damping_factor, 1e-300);
      jac = jac_at(x);
      jtj = jac.transpose() * jac;
      grad = jac.transpose() * r;
      if (rel < cfg.cost_tol || cost == 0.0) {
        res.converged = true;
        ++res.iterations;
        break;
      }
    } else {
      lambda *= cfg.damping_factor;
      if (lambda > cfg.max_damping) {
        // No damping level reduces the cost: x is a local minimum to working precision.
        res.converged = true;
        break;
      }
    }
  }

  res.params = x;
  res.cost = cost;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(jtj);
  if (lu.rank() < n) throw SingularMatrixError("lm_fit: J^T J is singular at the solution");
  const double sigma2 = m > n ? cost / static_cast<double>(m - n) : std::numeric_limits<double>::quiet_NaN();
  res.covariance = sigma2 * lu.inverse();
  return res;
}

}  // namespace brim
