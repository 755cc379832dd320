#include "brim/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "brim/error.hpp"
#include "brim/fitting.hpp"
#include "brim/numerics.hpp"
#include "brim/parallel.hpp"

namespace brim {
namespace {

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<long>(mid), v.end());
  double m = v[mid];
  if (v.size() % 2 == 0) {
    const double lower = *std::max_element(v.begin(), v.begin() + static_cast<long>(mid));
    m = 0.5 * (m + lower);
  }
  return m;
}

// Vandermonde rows in t, columns 1, t, t^2, ...
Eigen::MatrixXd vandermonde(const std::vector<double>& t, int order) {
  Eigen::MatrixXd v(static_cast<Eigen::Index>(t.size()), order + 1);
  for (std::size_t i = 0; i < t.size(); ++i) {
    double p = 1.0;
    for (int k = 0; k <= order; ++k) {
      v(static_cast<Eigen::Index>(i), k) = p;
      p *= t[i];
    }
  }
  return v;
}

}  // namespace

BaselineConfig BaselineConfig::with_rayleigh_mask(const FreqAxis& axis, double fsr, double half_width) {
  BaselineConfig cfg;
  for (double line : {0.0, fsr}) {
    FreqWindow w{std::max(axis.front(), line - half_width), std::min(axis.back(), line + half_width)};
    if (w.lo < w.hi) cfg.exclusion_windows.push_back(w);
  }
  return cfg;
}

BaselineFit fit_baseline(std::span<const double> spectrum, const FreqAxis& axis, const BaselineConfig& cfg) {
  const std::size_t n = spectrum.size();
  if (n != axis.size()) throw ParameterError("subtract_baseline: spectrum length must equal axis length");
  if (cfg.poly_order < 1) throw ParameterError("subtract_baseline: poly_order must be >= 1");
  if (cfg.max_iter < 1) throw ParameterError("subtract_baseline: max_iter must be >= 1");
  if (cfg.tol < 0) throw ParameterError("subtract_baseline: tol must be nonnegative");
  for (const auto& w : cfg.exclusion_windows)
    if (!(w.lo < w.hi)) throw ParameterError("subtract_baseline: exclusion window needs lo < hi");

  std::vector<std::size_t> keep;
  std::vector<bool> masked(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& w : cfg.exclusion_windows)
      if (w.contains(axis[i])) masked[i] = true;
    if (!masked[i]) keep.push_back(i);
  }
  if (static_cast<std::size_t>(cfg.poly_order) >= keep.size())
    throw ParameterError("subtract_baseline: poly_order " + std::to_string(cfg.poly_order) + " needs more than " +
                         std::to_string(keep.size()) + " unmasked points");

  // Map the axis to [-1, 1] for conditioning.
  const double lo = axis.front();
  const double hi = axis.back();
  auto scaled = [&](double v) { return 2.0 * (v - lo) / (hi - lo) - 1.0; };
  std::vector<double> t_keep(keep.size());
  for (std::size_t k = 0; k < keep.size(); ++k) t_keep[k] = scaled(axis[keep[k]]);
  const Eigen::MatrixXd v = vandermonde(t_keep, cfg.poly_order);
  const auto qr = v.colPivHouseholderQr();

  Vector curve(static_cast<Eigen::Index>(keep.size()));
  for (std::size_t k = 0; k < keep.size(); ++k) curve[static_cast<Eigen::Index>(k)] = spectrum[keep[k]];

  BaselineFit out;
  Vector coef = Vector::Zero(cfg.poly_order + 1);
  for (out.iterations = 1; out.iterations <= cfg.max_iter; ++out.iterations) {
    coef = qr.solve(curve);
    const Vector fitted = v * coef;
    const Vector next = curve.cwiseMin(fitted);
    const double scale = curve.cwiseAbs().maxCoeff();
    const double change = scale > 0 ? (next - curve).cwiseAbs().maxCoeff() / scale : 0.0;
    curve = next;
    if (change < cfg.tol) break;
  }
  out.iterations = std::min(out.iterations, cfg.max_iter);

  out.baseline.resize(n);
  out.corrected.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = scaled(axis[i]);
    double b = 0.0;
    for (int k = cfg.poly_order; k >= 0; --k) b = b * t + coef[k];
    out.baseline[i] = b;
    out.corrected[i] = masked[i] ? 0.0 : spectrum[i] - b;
  }
  return out;
}

std::vector<double> subtract_baseline(std::span<const double> spectrum, const FreqAxis& axis,
                                      const BaselineConfig& cfg) {
  return fit_baseline(spectrum, axis, cfg).corrected;
}

std::vector<double> snv_normalize(std::span<const double> spectrum) {
  const std::size_t n = spectrum.size();
  if (n < 2) throw DegenerateInputError("snv_normalize: need at least 2 points");
  const double mean = std::accumulate(spectrum.begin(), spectrum.end(), 0.0) / static_cast<double>(n);
  double ss = 0.0;
  for (double v : spectrum) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  if (!(sd > 0)) throw DegenerateInputError("snv_normalize: spectrum has zero variance");
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = (spectrum[i] - mean) / sd;
  return out;
}

std::vector<double> smooth(std::span<const double> spectrum, int window, int poly_order) {
  const int n = static_cast<int>(spectrum.size());
  if (window < 3 || window % 2 == 0) throw ParameterError("smooth: window must be odd and >= 3");
  if (window > n) throw ParameterError("smooth: window exceeds spectrum length");
  if (poly_order < 0 || poly_order >= window) throw ParameterError("smooth: poly_order must be in [0, window)");

  const int half = window / 2;
  std::vector<double> t(static_cast<std::size_t>(window));
  for (int k = 0; k < window; ++k) t[k] = static_cast<double>(k - half) / std::max(half, 1);
  const Eigen::MatrixXd v = vandermonde(t, poly_order);
  const Eigen::MatrixXd pinv = v.completeOrthogonalDecomposition().pseudoInverse();
  // weights.row(e) evaluates the local fit at window position e
  const Eigen::MatrixXd weights = v * pinv;

  std::vector<double> out(spectrum.size());
  for (int i = 0; i < n; ++i) {
    const int start = std::clamp(i - half, 0, n - window);
    const int pos = i - start;
    double acc = 0.0;
    for (int k = 0; k < window; ++k) acc += weights(pos, k) * spectrum[start + k];
    out[i] = acc;
  }
  return out;
}

std::vector<double> shift_spectrum(std::span<const double> spectrum, const FreqAxis& axis, double delta) {
  const std::size_t n = spectrum.size();
  if (n != axis.size()) throw ParameterError("shift_spectrum: spectrum length must equal axis length");
  const auto& nu = axis.values();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double src = nu[i] - delta;
    if (src <= nu.front()) {
      out[i] = spectrum.front();
    } else if (src >= nu.back()) {
      out[i] = spectrum.back();
    } else {
      const auto it = std::upper_bound(nu.begin(), nu.end(), src);
      const std::size_t j = static_cast<std::size_t>(it - nu.begin());
      const double f = (src - nu[j - 1]) / (nu[j] - nu[j - 1]);
      out[i] = (1.0 - f) * spectrum[j - 1] + f * spectrum[j];
    }
  }
  return out;
}

double peak_centroid(std::span<const double> spectrum, const FreqAxis& axis, FreqWindow window) {
  std::size_t first = axis.size(), last = 0;
  for (std::size_t i = 0; i < axis.size(); ++i) {
    if (window.contains(axis[i])) {
      first = std::min(first, i);
      last = i;
    }
  }
  if (first >= last) throw ParameterError("peak_centroid: window covers fewer than 2 samples");
  const double x0 = axis[first], x1 = axis[last];
  const double y0 = spectrum[first], y1 = spectrum[last];
  double num = 0.0, den = 0.0;
  for (std::size_t i = first; i <= last; ++i) {
    const double base = y0 + (y1 - y0) * (axis[i] - x0) / (x1 - x0);
    const double excess = std::max(0.0, spectrum[i] - base);
    num += axis[i] * excess;
    den += excess;
  }
  if (!(den > 0)) throw DegenerateInputError("peak_centroid: no signal above the window baseline");
  return num / den;
}

namespace {

std::vector<double> reference_spectrum(const HyperCube& strip, const std::vector<bool>* mask) {
  std::vector<double> mean(strip.channels(), 0.0);
  std::size_t used = 0;
  for (std::size_t i = 0; i < strip.pixels(); ++i) {
    if (mask && !(*mask)[i]) continue;
    auto s = strip.row(i);
    for (std::size_t k = 0; k < s.size(); ++k) mean[k] += s[k];
    ++used;
  }
  if (used == 0) return mean;
  for (double& v : mean) v /= static_cast<double>(used);
  return mean;
}

bool reference_present(const std::vector<double>& spec, const FreqAxis& axis, FreqWindow window) {
  const double level = median(spec);
  std::vector<double> dev(spec.size());
  for (std::size_t i = 0; i < spec.size(); ++i) dev[i] = std::abs(spec[i] - level);
  const double spread = median(dev);
  double peak = 0.0;
  for (std::size_t i = 0; i < spec.size(); ++i)
    if (window.contains(axis[i])) peak = std::max(peak, spec[i] - level);
  return peak > 3.0 * spread && peak > 0.0;
}

}  // namespace

std::vector<HyperCube> split_strips(const HyperCube& cube, std::size_t n) {
  if (n == 0 || n > cube.ny()) throw ParameterError("split_strips: strip count must lie in [1, ny]");
  std::vector<HyperCube> out;
  for (std::size_t s = 0; s < n; ++s) {
    const std::size_t y0 = s * cube.ny() / n, y1 = (s + 1) * cube.ny() / n;
    Matrix block = cube.data().middleRows(static_cast<Eigen::Index>(y0 * cube.nx()),
                                          static_cast<Eigen::Index>((y1 - y0) * cube.nx()));
    out.emplace_back(cube.nx(), y1 - y0, cube.axis(), std::move(block), cube.meta());
  }
  return out;
}

StitchResult correct_drift_stitch(const std::vector<HyperCube>& strips, FreqWindow reference_window,
                                  const std::vector<std::vector<bool>>& reference_masks) {
  if (strips.empty()) throw ParameterError("correct_drift_stitch: no strips");
  if (!(reference_window.lo < reference_window.hi))
    throw ParameterError("correct_drift_stitch: reference window needs lo < hi");
  if (!reference_masks.empty() && reference_masks.size() != strips.size())
    throw ParameterError("correct_drift_stitch: need one reference mask per strip");
  const auto& first = strips.front();
  for (std::size_t s = 0; s < strips.size(); ++s) {
    if (strips[s].nx() != first.nx())
      throw ParameterError("correct_drift_stitch: strip " + std::to_string(s) + " has nx " +
                           std::to_string(strips[s].nx()) + ", expected " + std::to_string(first.nx()));
    if (!(strips[s].axis() == first.axis()))
      throw ParameterError("correct_drift_stitch: strip " + std::to_string(s) + " has a different axis");
    if (!reference_masks.empty() && reference_masks[s].size() != strips[s].pixels())
      throw ParameterError("correct_drift_stitch: mask " + std::to_string(s) + " has the wrong size");
  }

  StitchResult out;
  if (strips.size() == 1) {
    out.cube = first;
    out.offsets = {0.0};
    return out;
  }

  const auto& axis = first.axis();
  double target = 0.0;
  std::size_t total_rows = 0;
  for (std::size_t s = 0; s < strips.size(); ++s) {
    const auto* mask = reference_masks.empty() ? nullptr : &reference_masks[s];
    const auto ref = reference_spectrum(strips[s], mask);
    if (!reference_present(ref, axis, reference_window))
      throw DegenerateInputError("correct_drift_stitch: reference peak not found in strip " + std::to_string(s));
    double delta = 0.0;
    if (s == 0) {
      target = peak_centroid(ref, axis, reference_window);
    } else {
      // Window truncation biases the centroid, so iterate to a fixed point.
      for (int it = 0; it < 50; ++it) {
        const double c = peak_centroid(shift_spectrum(ref, axis, delta), axis, reference_window);
        const double err = target - c;
        delta += err;
        if (std::abs(err) < 1e-7) break;
      }
    }
    out.offsets.push_back(delta);
    total_rows += strips[s].pixels();
  }

  Matrix data(static_cast<Eigen::Index>(total_rows), static_cast<Eigen::Index>(axis.size()));
  std::size_t ny = 0;
  Eigen::Index row = 0;
  for (std::size_t s = 0; s < strips.size(); ++s) {
    for (std::size_t i = 0; i < strips[s].pixels(); ++i, ++row) {
      if (out.offsets[s] == 0.0) {
        data.row(row) = strips[s].data().row(static_cast<Eigen::Index>(i));
      } else {
        const auto shifted = shift_spectrum(strips[s].row(i), axis, out.offsets[s]);
        data.row(row) = Eigen::Map<const Eigen::RowVectorXd>(shifted.data(), static_cast<Eigen::Index>(shifted.size()));
      }
    }
    ny += strips[s].ny();
  }
  Metadata meta = first.meta();
  std::string offsets;
  for (std::size_t s = 0; s < out.offsets.size(); ++s) offsets += (s ? "," : "") + format_value(out.offsets[s]);
  meta["drift_offsets_ghz"] = offsets;
  out.cube = HyperCube(first.nx(), ny, axis, std::move(data), std::move(meta));
  return out;
}

HyperCube preprocess_cube(const HyperCube& cube, const PreprocessOptions& opts) {
  Matrix data = cube.data();
  parallel_for(cube.pixels(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      auto src = cube.row(i);
      std::vector<double> s(src.begin(), src.end());
      if (opts.baseline) s = subtract_baseline(s, cube.axis(), *opts.baseline);
      if (opts.smoothing) s = smooth(s, opts.smoothing->first, opts.smoothing->second);
      if (opts.snv) s = snv_normalize(s);
      data.row(static_cast<Eigen::Index>(i)) =
          Eigen::Map<const Eigen::RowVectorXd>(s.data(), static_cast<Eigen::Index>(s.size()));
    }
  });
  Metadata meta = cube.meta();
  if (opts.baseline && !opts.baseline->exclusion_windows.empty()) {
    std::string windows;
    for (const auto& w : opts.baseline->exclusion_windows)
      windows += (windows.empty() ? "" : ";") + format_value(w.lo) + ":" + format_value(w.hi);
    meta[kExcludedWindowsKey] = windows;
  }
  return HyperCube(cube.nx(), cube.ny(), cube.axis(), std::move(data), std::move(meta));
}

}  // namespace brim
