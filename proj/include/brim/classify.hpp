#pragma once

#include <optional>
#include <span>
#include <vector>

#include "brim/types.hpp"

namespace brim {

struct ScatterPair {
  Matrix s_intra;  // S_I, f x f
  Matrix s_inter;  // S_II, f x f
  std::vector<int> labels;  // sorted distinct class labels
  std::vector<Vector> class_means;
  Vector overall_mean;
  std::vector<std::size_t> class_counts;
};

// S_I sums outer products of deviations from each class mean. S_II sums
// (mu_j - mu)(mu_j - mu)^T with mu the unweighted mean of class means, unless
// weight_by_count, which multiplies each term by N_j and uses the sample mean.
// Throws ContractError for fewer than two classes.
ScatterPair scatter_matrices(const Matrix& features, std::span<const int> labels, bool weight_by_count = false);

struct LdaModel {
  Matrix directions;  // f x k, k <= min(c - 1, f)
  std::vector<int> class_labels;
  Matrix projected_means;  // c x k, row j pairs with class_labels[j]
  double regularization = 0.0;
};

// Generalized eigenproblem S_II w = lambda (S_I + ridge I) w solved through a
// Cholesky whitening of S_I + ridge I. Without a ridge, 1e-6 trace(S_I) / f is
// used. Throws SingularMatrixError if S_I + ridge I is not positive definite.
LdaModel lda_train(const Matrix& features, std::span<const int> labels, std::optional<double> ridge = std::nullopt,
                   bool weight_by_count = false);

// Nearest projected class mean, ties to the lowest label.
std::vector<int> lda_predict(const LdaModel& model, const Matrix& features);

// -1 for |s - mean| >= k_sigma * sd (sample sd), else 1 above the mean, else 0.
// Throws ParameterError for n < 3, DegenerateInputError for zero spread.
std::vector<int> threshold_label(std::span<const double> scores, double k_sigma = 2.0);

}  // namespace brim
