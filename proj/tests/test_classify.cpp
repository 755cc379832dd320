#include <doctest.h>

#include <map>
#include <numeric>

#include "brim/classify.hpp"
#include "brim/error.hpp"
#include "util.hpp"

using namespace brim;

namespace {

struct Blobs {
  Matrix x;
  std::vector<int> y;
};

Blobs blobs(const std::vector<int>& class_ids, int per_class, int f, double spread, std::mt19937_64& rng) {
  Blobs b;
  b.x = testutil::random_matrix(static_cast<Eigen::Index>(class_ids.size()) * per_class, f, rng, spread);
  const Matrix centres = testutil::random_matrix(static_cast<Eigen::Index>(class_ids.size()), f, rng, 5.0);
  for (std::size_t c = 0; c < class_ids.size(); ++c)
    for (int i = 0; i < per_class; ++i) {
      const auto row = static_cast<Eigen::Index>(c * per_class + i);
      b.x.row(row) += centres.row(static_cast<Eigen::Index>(c));
      b.y.push_back(class_ids[c]);
    }
  return b;
}

// Element-by-element double loop over samples and feature pairs.
void scatter_oracle(const Matrix& x, const std::vector<int>& y, bool weighted, Matrix& s_i, Matrix& s_ii) {
  const auto f = x.cols();
  std::map<int, std::vector<double>> sums;
  std::map<int, int> counts;
  for (Eigen::Index n = 0; n < x.rows(); ++n) {
    auto& s = sums[y[n]];
    s.resize(f, 0.0);
    for (Eigen::Index a = 0; a < f; ++a) s[a] += x(n, a);
    counts[y[n]]++;
  }
  std::map<int, std::vector<double>> means;
  std::vector<double> mu(f, 0.0);
  for (auto& [c, s] : sums) {
    means[c] = s;
    for (double& v : means[c]) v /= counts[c];
    for (Eigen::Index a = 0; a < f; ++a)
      mu[a] += weighted ? s[a] / x.rows() : means[c][a] / static_cast<double>(sums.size());
  }
  s_i = Matrix::Zero(f, f);
  s_ii = Matrix::Zero(f, f);
  for (Eigen::Index n = 0; n < x.rows(); ++n)
    for (Eigen::Index a = 0; a < f; ++a)
      for (Eigen::Index b = 0; b < f; ++b)
        s_i(a, b) += (x(n, a) - means[y[n]][a]) * (x(n, b) - means[y[n]][b]);
  for (auto& [c, m] : means)
    for (Eigen::Index a = 0; a < f; ++a)
      for (Eigen::Index b = 0; b < f; ++b)
        s_ii(a, b) += (weighted ? counts[c] : 1) * (m[a] - mu[a]) * (m[b] - mu[b]);
}

}  // namespace

TEST_SUITE("classify") {
  TEST_CASE("scatter matrices match the double loop") {
    std::mt19937_64 rng(31);
    for (bool weighted : {false, true}) {
      for (int trial = 0; trial < 10; ++trial) {
        const int f = 2 + trial % 4;
        Blobs b = blobs({0, 3, 7}, 10 + trial, f, 1.0, rng);
        b.y.back() = 0;  // unequal class sizes
        Matrix s_i, s_ii;
        scatter_oracle(b.x, b.y, weighted, s_i, s_ii);
        const ScatterPair sp = scatter_matrices(b.x, b.y, weighted);
        CHECK((sp.s_intra - s_i).cwiseAbs().maxCoeff() < 1e-10 * std::max(1.0, s_i.cwiseAbs().maxCoeff()));
        CHECK((sp.s_inter - s_ii).cwiseAbs().maxCoeff() < 1e-10 * std::max(1.0, s_ii.cwiseAbs().maxCoeff()));
        CHECK(sp.labels == std::vector<int>{0, 3, 7});
      }
    }
  }

  TEST_CASE("scatter needs two classes") {
    const Matrix x = Matrix::Ones(4, 2);
    const std::vector<int> y(4, 1);
    CHECK_THROWS_AS(scatter_matrices(x, y), ContractError);
  }

  TEST_CASE("lda separates well-spaced classes") {
    std::mt19937_64 rng(32);
    const Blobs train = blobs({0, 1, 2}, 60, 4, 0.5, rng);
    const LdaModel m = lda_train(train.x, train.y);
    CHECK(m.directions.cols() == 2);
    CHECK(lda_predict(m, train.x) == train.y);
  }

  TEST_CASE("lda relabeling invariance is exact") {
    std::mt19937_64 rng(33);
    const Blobs b = blobs({0, 1, 2}, 40, 3, 2.0, rng);
    const std::map<int, int> remap{{0, 9}, {1, 4}, {2, 6}};
    std::vector<int> y2;
    for (int v : b.y) y2.push_back(remap.at(v));
    const auto p1 = lda_predict(lda_train(b.x, b.y), b.x);
    const auto p2 = lda_predict(lda_train(b.x, y2), b.x);
    for (std::size_t i = 0; i < p1.size(); ++i) CHECK(remap.at(p1[i]) == p2[i]);
  }

  TEST_CASE("lda with a singular within-class scatter") {
    Matrix x(4, 2);
    x << 0, 1, 0.2, 1, 1, 1, 1.2, 1;  // second feature is constant
    const std::vector<int> y{0, 0, 1, 1};
    CHECK_THROWS_AS(lda_train(x, y, 0.0), SingularMatrixError);
    const LdaModel m = lda_train(x, y);
    CHECK(lda_predict(m, x) == y);
  }

  TEST_CASE("lda prediction ties go to the lowest label") {
    LdaModel m;
    m.directions = Matrix::Identity(1, 1);
    m.class_labels = {2, 5};
    m.projected_means = (Matrix(2, 1) << -1.0, 1.0).finished();
    CHECK(lda_predict(m, Matrix::Zero(1, 1)) == std::vector<int>{2});
  }

  TEST_CASE("threshold_label") {
    std::vector<double> s{0, 0, 0, 0, 1, 1, 1, 1, 0.5, 0.5};
    s.push_back(100.0);
    const auto l = threshold_label(s, 2.0);
    CHECK(l.back() == -1);
    CHECK(l[0] == 0);
    const double mean = std::accumulate(s.begin(), s.end(), 0.0) / s.size();
    for (std::size_t i = 0; i + 1 < s.size(); ++i) CHECK(l[i] == (s[i] > mean ? 1 : 0));
    CHECK_THROWS_AS(threshold_label(std::vector<double>{1, 2}), ParameterError);
    CHECK_THROWS_AS(threshold_label(std::vector<double>{2, 2, 2}), DegenerateInputError);
  }
}
