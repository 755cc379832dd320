#include <doctest.h>

#include <cmath>
#include <set>

#include "brim/decompose.hpp"
#include "brim/error.hpp"
#include "util.hpp"

using namespace brim;

namespace {

// Rows of a rank-r signal plus small noise.
Matrix low_rank(int n, int f, int r, double noise, std::mt19937_64& rng) {
  return testutil::random_matrix(n, r, rng) * testutil::random_matrix(r, f, rng, 3.0) +
         testutil::random_matrix(n, f, rng, noise);
}

// Mixtures of p nonnegative endmembers with Dirichlet(1) abundances; the
// first p rows are the pure endmembers themselves.
struct Simplex {
  Matrix endmembers;  // f x p
  Matrix abundances;  // n x p
  Matrix data;        // n x f
};

Simplex simplex_data(int n, int f, int p, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::exponential_distribution<double> e(1.0);
  Simplex s;
  s.endmembers.resize(f, p);
  for (int i = 0; i < f; ++i)
    for (int j = 0; j < p; ++j) s.endmembers(i, j) = u(rng) * 10.0;
  s.abundances.resize(n, p);
  for (int i = 0; i < n; ++i) {
    double sum = 0;
    for (int j = 0; j < p; ++j) sum += s.abundances(i, j) = (i < p ? (i == j) : e(rng));
    s.abundances.row(i) /= sum;
  }
  s.data = s.abundances * s.endmembers.transpose();
  return s;
}

}  // namespace

TEST_SUITE("decompose") {
  TEST_CASE("pca loadings are orthonormal and explained fractions descend") {
    std::mt19937_64 rng(21);
    const Matrix x = low_rank(120, 30, 4, 0.1, rng);
    const Decomposition d = pca(x, 6);
    CHECK((d.loadings.transpose() * d.loadings - Matrix::Identity(6, 6)).cwiseAbs().maxCoeff() < 1e-8);
    for (std::size_t k = 1; k < d.explained.size(); ++k) CHECK(d.explained[k] <= d.explained[k - 1]);
    const auto curve = explained_variance_curve(x);
    double total = 0;
    for (double v : curve) total += v;
    CHECK(total == doctest::Approx(1.0));
  }

  TEST_CASE("pca truncation error equals discarded eigenvalues") {
    std::mt19937_64 rng(22);
    for (int trial = 0; trial < 5; ++trial) {
      const Matrix x = low_rank(80, 20, 3, 0.2, rng);
      const int p = 3 + trial % 3;
      const Decomposition d = pca(x, p);
      const double err = (x - reconstruct(d).data_hat).squaredNorm();
      double discarded = 0;
      for (std::size_t k = static_cast<std::size_t>(p); k < d.eigenvalues.size(); ++k) discarded += d.eigenvalues[k];
      CHECK(err == doctest::Approx(discarded * (x.rows() - 1)).epsilon(1e-6));
      CHECK(reconstruct(d, x).residual_norm == doctest::Approx(std::sqrt(err)));
    }
  }

  TEST_CASE("pca scores are uncorrelated with eigenvalue variances") {
    std::mt19937_64 rng(23);
    const Matrix x = low_rank(100, 15, 5, 0.3, rng);
    const Decomposition d = pca(x, 5);
    const Matrix cov = d.scores.transpose() * d.scores / 99.0;
    for (int i = 0; i < 5; ++i)
      for (int j = 0; j < 5; ++j)
        CHECK(cov(i, j) == doctest::Approx(i == j ? d.eigenvalues[i] : 0.0).scale(d.eigenvalues[0]).epsilon(1e-9));
  }

  TEST_CASE("pca argument checks") {
    const Matrix x = Matrix::Ones(5, 4);
    CHECK_THROWS_AS(pca(x, 0), ParameterError);
    CHECK_THROWS_AS(pca(x, 5), ParameterError);
  }

  TEST_CASE("vca finds the pure pixels of a simplex") {
    std::mt19937_64 rng(24);
    for (int p : {2, 3, 5}) {
      const Simplex s = simplex_data(400, 60, p, rng);
      const Decomposition d = vca(s.data, p, 7);
      std::set<std::size_t> found(d.pure_pixel_indices.begin(), d.pure_pixel_indices.end());
      std::set<std::size_t> want;
      for (int i = 0; i < p; ++i) want.insert(static_cast<std::size_t>(i));
      CHECK(found == want);
      for (Eigen::Index i = 0; i < d.scores.rows(); ++i) {
        CHECK(d.scores.row(i).sum() == doctest::Approx(1.0));
        CHECK(d.scores.row(i).minCoeff() >= 0.0);
      }
      CHECK((reconstruct(d).data_hat - s.data).cwiseAbs().maxCoeff() < 1e-8 * s.data.cwiseAbs().maxCoeff());
    }
  }

  TEST_CASE("vca takes the randomized path on large inputs") {
    std::mt19937_64 rng(25);
    const Simplex s = simplex_data(900, 200, 3, rng);
    const Decomposition d = vca(s.data, 3, 1);
    std::set<std::size_t> found(d.pure_pixel_indices.begin(), d.pure_pixel_indices.end());
    CHECK(found == std::set<std::size_t>{0, 1, 2});
  }

  TEST_CASE("vca is deterministic for a seed") {
    std::mt19937_64 rng(26);
    const Simplex s = simplex_data(300, 40, 4, rng);
    const Decomposition a = vca(s.data, 4, 99);
    const Decomposition b = vca(s.data, 4, 99);
    CHECK(a.pure_pixel_indices == b.pure_pixel_indices);
    CHECK(a.scores == b.scores);
  }

  TEST_CASE("vca rejects p above the data rank") {
    std::mt19937_64 rng(27);
    const Simplex s = simplex_data(200, 40, 2, rng);
    CHECK_THROWS_AS(vca(s.data, 4, 1), ParameterError);
    CHECK_THROWS_AS(vca(s.data, 1, 1), ParameterError);
  }

  TEST_CASE("abundance modes") {
    std::mt19937_64 rng(28);
    const Simplex s = simplex_data(50, 30, 3, rng);
    const Matrix un = estimate_abundance(s.data, s.endmembers, AbundanceMode::Unconstrained);
    CHECK((un - s.abundances).cwiseAbs().maxCoeff() < 1e-10);
    const Matrix nn = estimate_abundance(s.data, s.endmembers, AbundanceMode::Nonneg);
    CHECK((nn - s.abundances).cwiseAbs().maxCoeff() < 1e-8);

    // Points outside the simplex: nonneg clamps, full also renormalizes.
    const Matrix outside = (Matrix(1, 3) << 1.5, -0.5, 0.0).finished() * s.endmembers.transpose();
    const Matrix f = estimate_abundance(outside, s.endmembers, AbundanceMode::Full);
    CHECK(f.minCoeff() >= 0.0);
    CHECK(f.sum() == doctest::Approx(1.0));
    const Matrix u = estimate_abundance(outside, s.endmembers, AbundanceMode::Unconstrained);
    CHECK(u(0, 1) == doctest::Approx(-0.5));
  }

  TEST_CASE("scores_map layout") {
    Decomposition d;
    d.loadings = Matrix::Identity(3, 2);
    d.scores = Matrix(6, 2);
    for (int i = 0; i < 6; ++i) d.scores.row(i) << i, 10 * i;
    const FloatGrid g = scores_map(d, 1, 3, 2);
    CHECK(g.at(1, 1) == 40.0);
    CHECK_THROWS_AS(scores_map(d, 2, 3, 2), ParameterError);
    CHECK_THROWS_AS(scores_map(d, 0, 4, 2), ParameterError);
  }
}
