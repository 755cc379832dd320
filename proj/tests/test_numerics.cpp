#include <doctest.h>

#include <cmath>

#include "brim/error.hpp"
#include "brim/numerics.hpp"
#include "util.hpp"

using namespace brim;

namespace {

Matrix random_symmetric(int n, std::mt19937_64& rng) {
  const Matrix a = testutil::random_matrix(n, n, rng);
  return (a + a.transpose()) / 2.0;
}

// Karush-Kuhn-Tucker conditions of min ||Ax - b||, x >= 0.
void check_kkt(const Matrix& a, const Vector& b, const Vector& x) {
  const Vector w = a.transpose() * (b - a * x);
  const double scale = 1e-8 * std::max(1.0, (a.transpose() * b).cwiseAbs().maxCoeff());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    CHECK(x[i] >= 0.0);
    CHECK(w[i] <= scale);
    if (x[i] > 0) CHECK(std::abs(w[i]) <= scale);
  }
}

}  // namespace

TEST_SUITE("numerics") {
  TEST_CASE("sym_eigen reconstructs and orders") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 20; ++trial) {
      const int n = 2 + trial % 9;
      const Matrix a = random_symmetric(n, rng);
      const EigenResult e = sym_eigen(a);
      const Matrix recon = e.vectors * e.values.asDiagonal() * e.vectors.transpose();
      CHECK((recon - a).norm() < 1e-10 * std::max(1.0, a.norm()));
      CHECK((e.vectors.transpose() * e.vectors - Matrix::Identity(n, n)).norm() < 1e-10);
      for (int k = 1; k < n; ++k) CHECK(e.values[k - 1] >= e.values[k]);
      for (int k = 0; k < n; ++k) {
        Eigen::Index imax = 0;
        e.vectors.col(k).cwiseAbs().maxCoeff(&imax);
        CHECK(e.vectors(imax, k) > 0);
      }
    }
  }

  TEST_CASE("sym_eigen rejects bad shapes") {
    CHECK_THROWS_AS(sym_eigen(Matrix::Zero(2, 3)), ContractError);
    Matrix a = Matrix::Identity(3, 3);
    a(0, 2) = 1.0;
    CHECK_THROWS_AS(sym_eigen(a), ContractError);
  }

  TEST_CASE("nnls satisfies KKT on random problems") {
    std::mt19937_64 rng(12);
    for (int trial = 0; trial < 50; ++trial) {
      const int m = 8 + trial % 12;
      const int n = 2 + trial % 6;
      const Matrix a = testutil::random_matrix(m, n, rng);
      const Vector b = testutil::random_matrix(m, 1, rng);
      const Vector x = nnls(a, b);
      check_kkt(a, b, x);
      const Vector xg = nnls_gram(a.transpose() * a, a.transpose() * b);
      CHECK((x - xg).norm() < 1e-8 * std::max(1.0, x.norm()));
    }
  }

  TEST_CASE("nnls recovers a feasible exact solution") {
    std::mt19937_64 rng(13);
    const Matrix a = testutil::random_matrix(30, 4, rng);
    const Vector truth = (Vector(4) << 0.0, 1.5, 0.25, 3.0).finished();
    const Vector x = nnls(a, a * truth);
    CHECK((x - truth).norm() < 1e-10);
  }

  TEST_CASE("least_squares matches the normal equations") {
    std::mt19937_64 rng(14);
    const Matrix a = testutil::random_matrix(40, 5, rng);
    const Vector b = testutil::random_matrix(40, 1, rng);
    const Vector x = least_squares(a, b);
    const Vector ref = (a.transpose() * a).ldlt().solve(a.transpose() * b);
    CHECK((x - ref).norm() < 1e-10);
  }

  TEST_CASE("numeric_jacobian matches the analytic one") {
    const ResidualFn f = [](const Vector& p) {
      Vector r(3);
      r << p[0] * p[0] + p[1], std::sin(p[0]) * p[1], std::exp(0.3 * p[1]);
      return r;
    };
    const Vector p = (Vector(2) << 0.7, -1.2).finished();
    Matrix j(3, 2);
    j << 2 * p[0], 1, std::cos(p[0]) * p[1], std::sin(p[0]), 0, 0.3 * std::exp(0.3 * p[1]);
    CHECK((numeric_jacobian(f, p) - j).cwiseAbs().maxCoeff() < 1e-7);
  }

  TEST_CASE("lm_fit recovers an exponential decay") {
    std::vector<double> t, y;
    for (int i = 0; i < 40; ++i) {
      t.push_back(0.1 * i);
      y.push_back(3.0 * std::exp(-1.7 * t.back()) + 0.5);
    }
    const ResidualFn res = [&](const Vector& p) {
      Vector r(t.size());
      for (std::size_t i = 0; i < t.size(); ++i) r[i] = p[0] * std::exp(-p[1] * t[i]) + p[2] - y[i];
      return r;
    };
    const Vector x0 = (Vector(3) << 1.0, 0.5, 0.0).finished();
    const LmResult r = lm_fit(res, {}, x0);
    CHECK(r.converged);
    CHECK(r.params[0] == doctest::Approx(3.0).epsilon(1e-6));
    CHECK(r.params[1] == doctest::Approx(1.7).epsilon(1e-6));
    CHECK(r.params[2] == doctest::Approx(0.5).epsilon(1e-6));
    for (std::size_t k = 1; k < r.cost_history.size(); ++k) CHECK(r.cost_history[k] <= r.cost_history[k - 1]);
  }

  TEST_CASE("lm_fit rejects a non-finite start") {
    const ResidualFn res = [](const Vector& p) {
      Vector r(2);
      r << std::log(p[0]), p[0];
      return r;
    };
    CHECK_THROWS_AS(lm_fit(res, {}, (Vector(1) << -1.0).finished()), DegenerateInputError);
  }
}
