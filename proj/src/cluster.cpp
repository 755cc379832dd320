#include "brim/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <random>

#include "brim/error.hpp"
#include "brim/parallel.hpp"

namespace brim {

DistanceMetric DistanceMetric::minkowski(double r) {
  DistanceMetric m;
  m.kind = Kind::Minkowski;
  m.order = r;
  return m;
}

DistanceMetric DistanceMetric::correlation() {
  DistanceMetric m;
  m.kind = Kind::Correlation;
  return m;
}

DistanceMetric DistanceMetric::mahalanobis(Matrix covariance, double ridge) {
  DistanceMetric m;
  m.kind = Kind::Mahalanobis;
  m.covariance = std::move(covariance);
  m.ridge = ridge;
  return m;
}

DistanceMetric DistanceMetric::mahalanobis_pooled(const Matrix& x) {
  if (x.rows() < 2) throw ParameterError("mahalanobis_pooled: need at least two rows");
  const Matrix centred = x.rowwise() - x.colwise().mean();
  Matrix cov = (centred.transpose() * centred) / static_cast<double>(x.rows() - 1);
  const double ridge = 1e-3 * cov.trace() / static_cast<double>(x.cols());
  return mahalanobis(std::move(cov), ridge);
}

std::string DistanceMetric::name() const {
  switch (kind) {
    case Kind::Minkowski:
      return "minkowski";
    case Kind::Correlation:
      return "correlation";
    case Kind::Mahalanobis:
      return "mahalanobis";
  }
  return "unknown";
}

CondensedDistances::CondensedDistances(std::size_t n_, std::vector<double> values_) : n(n_), values(std::move(values_)) {
  if (values.size() != n * (n - 1) / 2)
    throw ParameterError("CondensedDistances: " + std::to_string(values.size()) + " values for n = " +
                         std::to_string(n));
}

double CondensedDistances::operator()(std::size_t i, std::size_t j) const {
  if (i == j) return 0.0;
  if (i > j) std::swap(i, j);
  return values[index(n, i, j)];
}

namespace {

double euclidean(const double* a, const double* b, Eigen::Index f) {
  double s = 0.0;
  for (Eigen::Index k = 0; k < f; ++k) {
    const double d = a[k] - b[k];
    s += d * d;
  }
  return std::sqrt(s);
}

double minkowski_dist(const double* a, const double* b, Eigen::Index f, double r) {
  if (r == 2.0) return euclidean(a, b, f);
  double s = 0.0;
  if (r == 1.0) {
    for (Eigen::Index k = 0; k < f; ++k) s += std::abs(a[k] - b[k]);
    return s;
  }
  for (Eigen::Index k = 0; k < f; ++k) s += std::pow(std::abs(a[k] - b[k]), r);
  return std::pow(s, 1.0 / r);
}

template <typename Fn>
CondensedDistances fill_pairs(std::size_t n, Fn&& fn) {
  std::vector<double> out(n * (n - 1) / 2);
  parallel_for(n, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i)
      for (std::size_t j = i + 1; j < n; ++j) out[CondensedDistances::index(n, i, j)] = fn(i, j);
  });
  return CondensedDistances(n, std::move(out));
}

}  // namespace

CondensedDistances pairwise_distances(const Matrix& x, const DistanceMetric& metric) {
  const auto n = static_cast<std::size_t>(x.rows());
  const Eigen::Index f = x.cols();
  if (n < 2) throw ParameterError("pairwise_distances: need at least two rows");

  switch (metric.kind) {
    case DistanceMetric::Kind::Minkowski: {
      const double r = metric.order;
      if (!(r >= 1.0) || !std::isfinite(r)) throw ParameterError("pairwise_distances: Minkowski order must be >= 1");
      return fill_pairs(n, [&](std::size_t i, std::size_t j) {
        return minkowski_dist(x.row(static_cast<Eigen::Index>(i)).data(), x.row(static_cast<Eigen::Index>(j)).data(),
                              f, r);
      });
    }
    case DistanceMetric::Kind::Correlation: {
      Matrix centred = x.rowwise() - Eigen::RowVectorXd::Zero(f);
      std::vector<double> norms(n);
      for (std::size_t i = 0; i < n; ++i) {
        auto row = centred.row(static_cast<Eigen::Index>(i));
        row.array() -= row.mean();
        norms[i] = row.norm();
        if (!(norms[i] > 0))
          throw DegenerateInputError("pairwise_distances: row " + std::to_string(i) +
                                     " has zero variance under the correlation metric");
      }
      return fill_pairs(n, [&](std::size_t i, std::size_t j) {
        const double r = centred.row(static_cast<Eigen::Index>(i)).dot(centred.row(static_cast<Eigen::Index>(j))) /
                         (norms[i] * norms[j]);
        return std::clamp(1.0 - r, 0.0, 2.0);
      });
    }
    case DistanceMetric::Kind::Mahalanobis: {
      if (metric.covariance.rows() != f || metric.covariance.cols() != f)
        throw ParameterError("pairwise_distances: covariance must be " + std::to_string(f) + "x" + std::to_string(f));
      Eigen::MatrixXd c = metric.covariance;
      if (!c.isApprox(c.transpose(), 1e-10)) throw ParameterError("pairwise_distances: covariance is not symmetric");
      c.diagonal().array() += metric.ridge;
      Eigen::LLT<Eigen::MatrixXd> llt(c);
      if (llt.info() != Eigen::Success)
        throw ParameterError("pairwise_distances: regularized covariance is not positive definite");
      // With C = L L^T the distance is the Euclidean distance between L^-1 x.
      const Eigen::MatrixXd whitened_t = llt.matrixL().solve(Eigen::MatrixXd(x.transpose()));
      const Matrix whitened = whitened_t.transpose();
      return fill_pairs(n, [&](std::size_t i, std::size_t j) {
        return euclidean(whitened.row(static_cast<Eigen::Index>(i)).data(),
                         whitened.row(static_cast<Eigen::Index>(j)).data(), f);
      });
    }
  }
  throw ParameterError("pairwise_distances: unknown metric");
}

std::vector<int> cut_dendrogram(const Dendrogram& dendro, int n_clusters) {
  const std::size_t n = dendro.leaves;
  if (n_clusters < 1 || static_cast<std::size_t>(n_clusters) > n)
    throw ParameterError("cut_dendrogram: n_clusters must lie in [1, " + std::to_string(n) + "]");
  std::vector<std::size_t> parent(2 * n, 0);
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  const std::size_t applied = n - static_cast<std::size_t>(n_clusters);
  for (std::size_t k = 0; k < applied; ++k) {
    parent[dendro.merges[k].a] = n + k;
    parent[dendro.merges[k].b] = n + k;
  }
  auto root = [&](std::size_t i) {
    while (parent[i] != i) i = parent[i];
    return i;
  };
  std::map<std::size_t, int> ids;
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto [it, inserted] = ids.emplace(root(i), static_cast<int>(ids.size()));
    labels[i] = it->second;
  }
  return labels;
}

std::pair<ClusterResult, Dendrogram> hca_ward(const CondensedDistances& d, int n_clusters) {
  const std::size_t n = d.n;
  if (n < 1) throw ParameterError("hca_ward: empty distance set");
  if (n_clusters < 1 || static_cast<std::size_t>(n_clusters) > n)
    throw ParameterError("hca_ward: n_clusters must lie in [1, " + std::to_string(n) + "]");

  std::vector<double> dm(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) dm[i * n + j] = dm[j * n + i] = d.values[CondensedDistances::index(n, i, j)];

  std::vector<char> active(n, 1);
  std::vector<std::size_t> size(n, 1), id(n), nn(n, 0);
  std::iota(id.begin(), id.end(), std::size_t{0});
  std::vector<double> nnd(n, std::numeric_limits<double>::infinity());

  auto refresh = [&](std::size_t i) {
    nnd[i] = std::numeric_limits<double>::infinity();
    nn[i] = i;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i || !active[j]) continue;
      if (dm[i * n + j] < nnd[i]) {
        nnd[i] = dm[i * n + j];
        nn[i] = j;
      }
    }
  };
  for (std::size_t i = 0; i < n; ++i) refresh(i);

  Dendrogram dendro;
  dendro.leaves = n;
  dendro.merges.reserve(n > 0 ? n - 1 : 0);
  for (std::size_t step = 0; step + 1 < n; ++step) {
    std::size_t a = n, b = n;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      if (!active[i] || nn[i] == i) continue;
      const std::size_t lo = std::min(i, nn[i]), hi = std::max(i, nn[i]);
      if (nnd[i] < best || (nnd[i] == best && (lo < a || (lo == a && hi < b)))) {
        best = nnd[i];
        a = lo;
        b = hi;
      }
    }

    const double h = dm[a * n + b];
    const double sa = static_cast<double>(size[a]), sb = static_cast<double>(size[b]);
    for (std::size_t k = 0; k < n; ++k) {
      if (!active[k] || k == a || k == b) continue;
      const double sk = static_cast<double>(size[k]);
      const double v = ((sa + sk) * dm[a * n + k] + (sb + sk) * dm[b * n + k] - sk * h) / (sa + sb + sk);
      dm[a * n + k] = dm[k * n + a] = v;
    }
    dendro.merges.push_back({std::min(id[a], id[b]), std::max(id[a], id[b]), h, size[a] + size[b]});
    size[a] += size[b];
    active[b] = 0;
    id[a] = n + step;

    refresh(a);
    for (std::size_t k = 0; k < n; ++k) {
      if (!active[k] || k == a) continue;
      if (nn[k] == a || nn[k] == b) {
        refresh(k);
      } else if (dm[k * n + a] < nnd[k] || (dm[k * n + a] == nnd[k] && a < nn[k])) {
        nnd[k] = dm[k * n + a];
        nn[k] = a;
      }
    }
  }

  ClusterResult res;
  res.method = ClusterResult::Method::HCA;
  res.labels = cut_dendrogram(dendro, n_clusters);
  res.clusters = n_clusters;
  return {std::move(res), std::move(dendro)};
}

Matrix cluster_means(const Matrix& x, std::span<const int> labels, int clusters) {
  if (static_cast<std::size_t>(x.rows()) != labels.size())
    throw ParameterError("cluster_means: label count does not match row count");
  Matrix means = Matrix::Zero(clusters, x.cols());
  std::vector<std::size_t> counts(static_cast<std::size_t>(clusters), 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int l = labels[i];
    if (l < 0) continue;
    if (l >= clusters) throw ParameterError("cluster_means: label " + std::to_string(l) + " out of range");
    means.row(l) += x.row(static_cast<Eigen::Index>(i));
    ++counts[static_cast<std::size_t>(l)];
  }
  for (int j = 0; j < clusters; ++j)
    if (counts[static_cast<std::size_t>(j)] > 0) means.row(j) /= static_cast<double>(counts[static_cast<std::size_t>(j)]);
  return means;
}

ClusterResult kmeans(const Matrix& x, int k, double minkowski_order, std::uint64_t seed, int max_iter, double tol) {
  const auto n = static_cast<std::size_t>(x.rows());
  const Eigen::Index f = x.cols();
  if (k < 1 || static_cast<std::size_t>(k) > n)
    throw ParameterError("kmeans: K = " + std::to_string(k) + " must lie in [1, " + std::to_string(n) + "]");
  if (!(minkowski_order >= 1.0)) throw ParameterError("kmeans: Minkowski order must be >= 1");
  if (max_iter < 1) throw ParameterError("kmeans: max_iter must be positive");

  std::mt19937_64 rng(seed);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = 0; i < static_cast<std::size_t>(k); ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(order[i], order[pick(rng)]);
  }
  Matrix centroids(k, f);
  for (int j = 0; j < k; ++j) centroids.row(j) = x.row(static_cast<Eigen::Index>(order[static_cast<std::size_t>(j)]));

  ClusterResult res;
  res.method = ClusterResult::Method::KCA;
  res.labels.assign(n, -1);
  std::vector<double> dist(n, 0.0);
  double prev = std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < max_iter; ++iter) {
    std::vector<char> changed(n, 0);
    parallel_for(n, [&](std::size_t begin, std::size_t end) {
      for (std::size_t i = begin; i < end; ++i) {
        double best = std::numeric_limits<double>::infinity();
        int best_j = 0;
        for (int j = 0; j < k; ++j) {
          const double dd =
              minkowski_dist(x.row(static_cast<Eigen::Index>(i)).data(), centroids.row(j).data(), f, minkowski_order);
          if (dd < best) {
            best = dd;
            best_j = j;
          }
        }
        changed[i] = res.labels[i] != best_j;
        res.labels[i] = best_j;
        dist[i] = best;
      }
    });
    double inertia = 0.0;
    for (double v : dist) inertia += v * v;
    res.inertia_history.push_back(inertia);
    res.inertia = inertia;
    const auto changes = std::count(changed.begin(), changed.end(), char{1});

    std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
    for (int l : res.labels) ++counts[static_cast<std::size_t>(l)];
    const Matrix means = cluster_means(x, res.labels, k);
    std::vector<char> taken(n, 0);
    for (int j = 0; j < k; ++j) {
      if (counts[static_cast<std::size_t>(j)] > 0) {
        centroids.row(j) = means.row(j);
        continue;
      }
      std::size_t far = n;
      for (std::size_t i = 0; i < n; ++i)
        if (!taken[i] && (far == n || dist[i] > dist[far])) far = i;
      if (far == n) continue;
      taken[far] = 1;
      centroids.row(j) = x.row(static_cast<Eigen::Index>(far));
    }

    if (changes == 0) break;
    if (std::isfinite(prev) && std::abs(prev - inertia) <= tol * std::max(prev, std::numeric_limits<double>::min()))
      break;
    prev = inertia;
  }

  // Drop clusters that ended up empty so that labels stay contiguous.
  std::vector<int> remap(static_cast<std::size_t>(k), -1);
  int used = 0;
  for (int l : res.labels)
    if (remap[static_cast<std::size_t>(l)] < 0) remap[static_cast<std::size_t>(l)] = 0;
  for (int j = 0; j < k; ++j)
    if (remap[static_cast<std::size_t>(j)] == 0) remap[static_cast<std::size_t>(j)] = used++;
  res.centroids.resize(used, f);
  for (int j = 0; j < k; ++j)
    if (remap[static_cast<std::size_t>(j)] >= 0) res.centroids.row(remap[static_cast<std::size_t>(j)]) = centroids.row(j);
  for (int& l : res.labels) l = remap[static_cast<std::size_t>(l)];
  res.clusters = used;
  res.mean_spectra = cluster_means(x, res.labels, used);
  return res;
}

ClusterResult merge_by_mean_spectra(const HyperCube& cube, const ClusterResult& result, int target) {
  if (result.labels.size() != cube.pixels())
    throw ParameterError("merge_by_mean_spectra: label count does not match the cube");
  int current = result.clusters;
  for (int l : result.labels) current = std::max(current, l + 1);
  if (target < 1 || target > current)
    throw ParameterError("merge_by_mean_spectra: target must lie in [1, " + std::to_string(current) + "]");

  ClusterResult out = result;
  out.clusters = current;
  if (target < current) {
    const Matrix means = cluster_means(cube.data(), result.labels, current);
    const auto groups = hca_ward(pairwise_distances(means, DistanceMetric::minkowski(2.0)), target).first.labels;
    for (int& l : out.labels)
      if (l >= 0) l = groups[static_cast<std::size_t>(l)];
    out.clusters = target;
    out.centroids.resize(0, 0);
  }
  out.mean_spectra = cluster_means(cube.data(), out.labels, out.clusters);
  return out;
}

FloatGrid block_mean(const FloatGrid& image, std::size_t nx, std::size_t ny) {
  if (nx == 0 || ny == 0) throw ParameterError("block_mean: target size must be positive");
  if (image.nx < nx || image.ny < ny)
    throw ParameterError("block_mean: cannot upsample " + std::to_string(image.nx) + "x" + std::to_string(image.ny) +
                         " to " + std::to_string(nx) + "x" + std::to_string(ny));
  const std::size_t tw = image.nx / nx, th = image.ny / ny;
  std::vector<double> out(nx * ny);
  for (std::size_t ty = 0; ty < ny; ++ty) {
    const std::size_t y0 = ty * th, y1 = ty + 1 == ny ? image.ny : y0 + th;
    for (std::size_t tx = 0; tx < nx; ++tx) {
      const std::size_t x0 = tx * tw, x1 = tx + 1 == nx ? image.nx : x0 + tw;
      double s = 0.0;
      for (std::size_t y = y0; y < y1; ++y)
        for (std::size_t x = x0; x < x1; ++x) s += image.values[y * image.nx + x];
      out[ty * nx + tx] = s / static_cast<double>((y1 - y0) * (x1 - x0));
    }
  }
  return FloatGrid(nx, ny, std::move(out));
}

FloatGrid downsample_api(const FloatGrid& image, std::size_t nx, std::size_t ny) {
  FloatGrid g = block_mean(image, nx, ny);
  const auto [lo, hi] = std::minmax_element(g.values.begin(), g.values.end());
  const double min = *lo, range = *hi - *lo;
  for (double& v : g.values) v = range > 0 ? (v - min) / range : 0.0;
  return g;
}

CondensedDistances normalize_minmax(const CondensedDistances& d) {
  CondensedDistances out = d;
  if (out.values.empty()) return out;
  const auto [lo, hi] = std::minmax_element(out.values.begin(), out.values.end());
  const double min = *lo, range = *hi - *lo;
  for (double& v : out.values) v = range > 0 ? (v - min) / range : 0.0;
  return out;
}

CondensedDistances weighted_distances(const CondensedDistances& d_hs, const CondensedDistances& d_ap, double w) {
  if (d_hs.n != d_ap.n || d_hs.values.size() != d_ap.values.size())
    throw ParameterError("weighted_distances: inputs describe different observation counts");
  if (!(w >= 0.0 && w <= 1.0)) throw ParameterError("weighted_distances: w must lie in [0, 1]");
  std::vector<double> out(d_hs.values.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (1.0 - w) * d_hs.values[i] + w * d_ap.values[i];
  return CondensedDistances(d_hs.n, std::move(out));
}

ClusterResult apriori_cluster(const HyperCube& cube, const FloatGrid& api, double w, const DistanceMetric& metric,
                              int n_clusters) {
  const CondensedDistances d_hs = normalize_minmax(pairwise_distances(cube.data(), metric));
  const FloatGrid small = downsample_api(api, cube.nx(), cube.ny());
  const Matrix column = Eigen::Map<const Eigen::VectorXd>(small.values.data(), static_cast<Eigen::Index>(small.values.size()));
  const CondensedDistances d_ap = normalize_minmax(pairwise_distances(column, DistanceMetric::minkowski(2.0)));
  ClusterResult res = hca_ward(weighted_distances(d_hs, d_ap, w), n_clusters).first;
  res.method = ClusterResult::Method::APRIORI;
  res.mean_spectra = cluster_means(cube.data(), res.labels, res.clusters);
  return res;
}

double adjusted_rand_index(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size()) throw ParameterError("adjusted_rand_index: label vectors differ in length");
  const std::size_t n = a.size();
  if (n < 2) return 1.0;
  std::map<std::pair<int, int>, double> joint;
  std::map<int, double> ca, cb;
  for (std::size_t i = 0; i < n; ++i) {
    joint[{a[i], b[i]}] += 1;
    ca[a[i]] += 1;
    cb[b[i]] += 1;
  }
  auto c2 = [](double v) { return v * (v - 1) / 2; };
  double sum_joint = 0, sum_a = 0, sum_b = 0;
  for (const auto& [key, v] : joint) sum_joint += c2(v);
  for (const auto& [key, v] : ca) sum_a += c2(v);
  for (const auto& [key, v] : cb) sum_b += c2(v);
  const double expected = sum_a * sum_b / c2(static_cast<double>(n));
  const double max_index = 0.5 * (sum_a + sum_b);
  if (max_index == expected) return 1.0;
  return (sum_joint - expected) / (max_index - expected);
}

}  // namespace brim
