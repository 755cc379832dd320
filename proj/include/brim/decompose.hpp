#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "brim/hsdata.hpp"
#include "brim/types.hpp"

namespace brim {

enum class AbundanceMode { Unconstrained, Nonneg, Full };

// data ~ mean + scores * loadings^T. For PCA the loadings are orthonormal
// principal axes; for VCA they are endmember spectra and the scores are
// abundances.
struct Decomposition {
  enum class Method { PCA, VCA };
  Method method = Method::PCA;
  Matrix loadings;     // channels x p
  Matrix scores;       // pixels x p
  Vector mean_spectrum;  // zero for VCA
  std::vector<double> explained;           // PCA only, fraction of total variance
  std::vector<double> eigenvalues;         // PCA only, full covariance spectrum
  std::vector<std::size_t> pure_pixel_indices;  // VCA only
  std::uint64_t seed = 0;

  std::size_t components() const { return static_cast<std::size_t>(loadings.cols()); }
};

// Covariance is X^T X / (n - 1) on column-centred X.
// Throws ParameterError unless 1 <= p <= min(pixels, channels).
Decomposition pca(const Matrix& data, int p);

// Explained-variance fraction of every principal component, for choosing p.
std::vector<double> explained_variance_curve(const Matrix& data);

// Pure-pixel vertex component analysis. Rows are projected on the top-p
// eigenvectors of X^T X / n, then each endmember is the row with the largest
// |projection| on a seeded random direction orthogonal to the endmembers
// already chosen. Throws ParameterError when p < 2, p > pixels or the
// projected data has rank below p.
Decomposition vca(const Matrix& data, int p, std::uint64_t seed, AbundanceMode mode = AbundanceMode::Full);

// Per-row abundances for endmember columns. Full = nonnegative then scaled to
// unit row sum (rows summing to <= 1e-12 stay zero).
Matrix estimate_abundance(const Matrix& data, const Matrix& endmembers, AbundanceMode mode);

struct Reconstruction {
  Matrix data_hat;
  double residual_norm = 0.0;  // NaN unless the original data was given
};

Reconstruction reconstruct(const Decomposition& dec);
Reconstruction reconstruct(const Decomposition& dec, const Matrix& original);

// One score column laid out on the nx-by-ny pixel grid.
FloatGrid scores_map(const Decomposition& dec, std::size_t component, std::size_t nx, std::size_t ny);

}  // namespace brim
