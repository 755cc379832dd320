#include "brim/decompose.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "brim/error.hpp"
#include "brim/numerics.hpp"
#include "brim/parallel.hpp"

namespace brim {

Decomposition pca(const Matrix& data, int p) {
  const Eigen::Index n = data.rows();
  const Eigen::Index ns = data.cols();
  if (p < 1 || p > std::min(n, ns))
    throw ParameterError("pca: p = " + std::to_string(p) + " outside [1, " + std::to_string(std::min(n, ns)) + "]");
  if (!data.allFinite()) throw ParameterError("pca: data contains non-finite values");

  Decomposition dec;
  dec.method = Decomposition::Method::PCA;
  dec.mean_spectrum = data.colwise().mean().transpose();
  const Matrix centred = data.rowwise() - dec.mean_spectrum.transpose();
  Matrix cov = Matrix::Zero(ns, ns);
  if (n > 1) {
    cov.selfadjointView<Eigen::Lower>().rankUpdate(centred.transpose());
    cov = cov.selfadjointView<Eigen::Lower>();
    cov /= static_cast<double>(n - 1);
  }
  const EigenResult eig = sym_eigen(cov);

  dec.eigenvalues.assign(eig.values.data(), eig.values.data() + ns);
  double total = 0.0;
  for (double v : dec.eigenvalues) total += std::max(v, 0.0);
  dec.loadings = eig.vectors.leftCols(p);
  dec.scores = centred * dec.loadings;
  dec.explained.resize(static_cast<std::size_t>(p));
  for (int k = 0; k < p; ++k) dec.explained[k] = total > 0 ? std::max(eig.values[k], 0.0) / total : 0.0;
  return dec;
}

std::vector<double> explained_variance_curve(const Matrix& data) {
  const int full = static_cast<int>(std::min(data.rows(), data.cols()));
  return pca(data, full).explained;
}

Matrix estimate_abundance(const Matrix& data, const Matrix& endmembers, AbundanceMode mode) {
  if (data.cols() != endmembers.rows())
    throw ParameterError("estimate_abundance: endmember length must equal channel count");
  const Eigen::Index p = endmembers.cols();
  if (p < 1) throw ParameterError("estimate_abundance: need at least one endmember");
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr{Eigen::MatrixXd(endmembers)};
  if (qr.rank() < p) throw ParameterError("estimate_abundance: endmembers are rank deficient");

  const Eigen::Index n = data.rows();
  Matrix out(n, p);
  if (mode == AbundanceMode::Unconstrained) {
    out = qr.solve(Eigen::MatrixXd(data.transpose())).transpose();
    return out;
  }
  // Normal equations are shared by every row, so the active-set solves only
  // touch p x p systems.
  const Matrix gram = endmembers.transpose() * endmembers;
  // p is tiny, so a plain dot-product loop beats the blocked product here.
  const Matrix atb = data.lazyProduct(endmembers);
  // A nonnegative unconstrained optimum already satisfies the KKT conditions,
  // so the active-set solver only runs on rows where it does not.
  const Matrix free = gram.ldlt().solve(atb.transpose()).transpose();
  parallel_for(static_cast<std::size_t>(n), [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto row = static_cast<Eigen::Index>(i);
      Vector a = free.row(row).minCoeff() >= 0.0 ? Vector(free.row(row).transpose())
                                                  : nnls_gram(gram, atb.row(row).transpose());
      if (mode == AbundanceMode::Full) {
        const double sum = a.sum();
        if (sum > 1e-12) a /= sum;
      }
      out.row(row) = a.transpose();
    }
  });
  return out;
}

namespace {

struct TopSubspace {
  Matrix basis;      // channels x p, orthonormal
  Vector values;     // matching eigenvalues of X^T X / n, descending
  Matrix projected;  // X * basis
};

// Leading eigenvectors of X^T X / n. Small problems use the full
// eigendecomposition. Larger ones run one step of randomized subspace
// iteration and a Rayleigh-Ritz solve in the row space, which never forms the
// channel-by-channel matrix.
TopSubspace top_subspace(const Matrix& x, int p, std::mt19937_64& rng) {
  const Eigen::Index n = x.rows();
  const Eigen::Index ns = x.cols();
  const Eigen::Index l = std::min<Eigen::Index>(p + 4, std::min(n, ns));
  TopSubspace out;
  if (4 * l >= std::min(n, ns)) {
    Matrix corr = Matrix::Zero(ns, ns);
    corr.selfadjointView<Eigen::Lower>().rankUpdate(x.transpose());
    corr = corr.selfadjointView<Eigen::Lower>();
    corr /= static_cast<double>(n);
    const EigenResult eig = sym_eigen(corr);
    out.basis = eig.vectors.leftCols(p);
    out.values = eig.values.head(p);
    out.projected = x * out.basis;
    return out;
  }
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXd omega(ns, l);
  for (Eigen::Index j = 0; j < l; ++j)
    for (Eigen::Index i = 0; i < ns; ++i) omega(i, j) = gauss(rng);
  auto orth = [](const Eigen::MatrixXd& m) -> Eigen::MatrixXd {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(m);
    return qr.householderQ() * Eigen::MatrixXd::Identity(m.rows(), m.cols());
  };
  const Eigen::MatrixXd q = orth(x * omega);
  const Eigen::MatrixXd z = orth(x.transpose() * q);  // ns x l, orthonormal
  const Eigen::MatrixXd y = x * z;
  Matrix small = y.transpose() * y;
  small = (0.5 * (small + small.transpose())).eval();
  const EigenResult eig = sym_eigen(small);
  const Eigen::MatrixXd w = eig.vectors.leftCols(p);
  out.basis = z * w;
  out.projected = y * w;
  out.values = eig.values.head(p).cwiseMax(0.0) / static_cast<double>(n);
  return out;
}

}  // namespace

Decomposition vca(const Matrix& data, int p, std::uint64_t seed, AbundanceMode mode) {
  const Eigen::Index n = data.rows();
  const Eigen::Index ns = data.cols();
  if (p < 2) throw ParameterError("vca: p = " + std::to_string(p) + " must be >= 2");
  if (p > n) throw ParameterError("vca: p = " + std::to_string(p) + " exceeds pixel count " + std::to_string(n));
  if (p > ns) throw ParameterError("vca: p = " + std::to_string(p) + " exceeds channel count " + std::to_string(ns));
  if (!data.allFinite()) throw ParameterError("vca: data contains non-finite values");

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const TopSubspace sub = top_subspace(data, p, rng);
  if (!(sub.values[p - 1] > 1e-12 * sub.values[0]))
    throw ParameterError("vca: projected data has rank below p = " + std::to_string(p) + "; use a smaller p");
  const Matrix& projected = sub.projected;  // n x p

  Eigen::MatrixXd chosen(p, p);
  Decomposition dec;
  dec.method = Decomposition::Method::VCA;
  dec.seed = seed;
  for (int i = 0; i < p; ++i) {
    Vector f(p);
    for (int k = 0; k < p; ++k) f[k] = gauss(rng);
    if (i > 0) {
      const auto basis = chosen.leftCols(i);
      f -= basis * basis.colPivHouseholderQr().solve(f);
    }
    const double norm = f.norm();
    if (!(norm > 0)) throw ParameterError("vca: degenerate search direction");
    f /= norm;
    const Vector v = projected * f;
    Eigen::Index best = 0;
    double best_val = -1.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (std::abs(v[j]) > best_val) {
        best_val = std::abs(v[j]);
        best = j;
      }
    }
    chosen.col(i) = projected.row(best).transpose();
    dec.pure_pixel_indices.push_back(static_cast<std::size_t>(best));
  }

  dec.loadings.resize(ns, p);
  for (int i = 0; i < p; ++i)
    dec.loadings.col(i) = data.row(static_cast<Eigen::Index>(dec.pure_pixel_indices[i])).transpose();
  dec.mean_spectrum = Vector::Zero(ns);
  dec.scores = estimate_abundance(data, dec.loadings, mode);
  return dec;
}

Reconstruction reconstruct(const Decomposition& dec) {
  Reconstruction out;
  out.data_hat = dec.scores * dec.loadings.transpose();
  out.data_hat.rowwise() += dec.mean_spectrum.transpose();
  out.residual_norm = std::numeric_limits<double>::quiet_NaN();
  return out;
}

Reconstruction reconstruct(const Decomposition& dec, const Matrix& original) {
  Reconstruction out = reconstruct(dec);
  if (original.rows() != out.data_hat.rows() || original.cols() != out.data_hat.cols())
    throw ParameterError("reconstruct: original data has different dimensions");
  out.residual_norm = (original - out.data_hat).norm();
  return out;
}

FloatGrid scores_map(const Decomposition& dec, std::size_t component, std::size_t nx, std::size_t ny) {
  if (component >= dec.components()) throw ParameterError("scores_map: component index out of range");
  if (nx * ny != static_cast<std::size_t>(dec.scores.rows()))
    throw ParameterError("scores_map: nx*ny must equal the number of score rows");
  std::vector<double> values(nx * ny);
  for (std::size_t i = 0; i < values.size(); ++i)
    values[i] = dec.scores(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(component));
  return FloatGrid(nx, ny, std::move(values));
}

}  // namespace brim
