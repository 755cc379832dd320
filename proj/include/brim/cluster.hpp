#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "brim/hsdata.hpp"
#include "brim/types.hpp"

namespace brim {

struct DistanceMetric {
  enum class Kind { Minkowski, Correlation, Mahalanobis };
  Kind kind = Kind::Minkowski;
  double order = 2.0;  // Minkowski R
  Matrix covariance;   // Mahalanobis C
  double ridge = 0.0;  // added to the covariance diagonal

  static DistanceMetric minkowski(double r = 2.0);
  static DistanceMetric correlation();  // 1 - Pearson r of the two rows
  static DistanceMetric mahalanobis(Matrix covariance, double ridge);
  // Pooled covariance of the rows of x, ridge 1e-3 trace(C) / f.
  static DistanceMetric mahalanobis_pooled(const Matrix& x);

  std::string name() const;
};

struct CondensedDistances {
  std::size_t n = 0;
  std::vector<double> values;  // pair (i < j) at index(i, j)

  CondensedDistances() = default;
  CondensedDistances(std::size_t n_, std::vector<double> values_);

  static std::size_t index(std::size_t n, std::size_t i, std::size_t j) { return i * n - i * (i + 1) / 2 + (j - i - 1); }
  double operator()(std::size_t i, std::size_t j) const;
};

struct Merge {
  std::size_t a = 0;  // cluster ids: leaves 0..n-1, merge k creates n + k
  std::size_t b = 0;
  double height = 0.0;
  std::size_t size = 0;
};

struct Dendrogram {
  std::size_t leaves = 0;
  std::vector<Merge> merges;
};

struct ClusterResult {
  enum class Method { HCA, KCA, APRIORI };
  Method method = Method::HCA;
  std::vector<int> labels;      // 0..C-1
  Matrix centroids;             // KCA only
  Matrix mean_spectra;          // C x channels when computed from a cube
  double inertia = 0.0;         // KCA only
  std::vector<double> inertia_history;  // KCA only, one entry per assignment step
  int clusters = 0;
};

// Throws ParameterError for n < 2, bad R, dimension mismatch or a regularized
// covariance that is not positive definite; DegenerateInputError for a
// constant row under the correlation metric.
CondensedDistances pairwise_distances(const Matrix& x, const DistanceMetric& metric);

// Ward agglomeration using the Lance-Williams recurrence on the given
// dissimilarities, ties to the smallest index pair. Labels are numbered by
// first appearance in row order.
std::pair<ClusterResult, Dendrogram> hca_ward(const CondensedDistances& d, int n_clusters = 8);

// Labels from the first n - n_clusters merges of a dendrogram.
std::vector<int> cut_dendrogram(const Dendrogram& dendro, int n_clusters);

// Minkowski metric only; inertia is the sum of squared distances to the
// assigned centroid.
ClusterResult kmeans(const Matrix& x, int k = 8, double minkowski_order = 2.0, std::uint64_t seed = 0,
                     int max_iter = 300, double tol = 1e-6);

// Row j = mean of the rows labelled j.
Matrix cluster_means(const Matrix& x, std::span<const int> labels, int clusters);

ClusterResult merge_by_mean_spectra(const HyperCube& cube, const ClusterResult& result, int target);

// Block means over nx x ny tiles (the last tile in each direction takes the
// remainder). Throws ParameterError when asked to upsample.
FloatGrid block_mean(const FloatGrid& image, std::size_t nx, std::size_t ny);

// block_mean followed by min-max normalization to [0, 1].
FloatGrid downsample_api(const FloatGrid& image, std::size_t nx, std::size_t ny);

// Maps to [0, 1]; a constant input maps to all zeros.
CondensedDistances normalize_minmax(const CondensedDistances& d);

CondensedDistances weighted_distances(const CondensedDistances& d_hs, const CondensedDistances& d_ap, double w);

ClusterResult apriori_cluster(const HyperCube& cube, const FloatGrid& api, double w = 0.2,
                              const DistanceMetric& metric = {}, int n_clusters = 8);

double adjusted_rand_index(std::span<const int> a, std::span<const int> b);

}  // namespace brim
