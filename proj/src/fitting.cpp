#include "brim/fitting.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>
#include <tuple>
#include <utility>

#include "brim/error.hpp"
#include "brim/parallel.hpp"

namespace brim {

double ShiftConvention::shift_of(double center) const {
  const double d = std::abs(center - midpoint);
  return layout == Layout::Centered ? d : fsr / 2 - d;
}

double ShiftConvention::shift_slope(double center) const {
  const double s = center >= midpoint ? 1.0 : -1.0;
  return layout == Layout::Centered ? s : -s;
}

std::vector<double> lorentzian_eval(std::span<const LorentzianPeak> peaks, const FreqAxis& axis) {
  std::vector<double> out(axis.size(), 0.0);
  for (const auto& p : peaks) {
    const double h2 = 0.25 * p.fwhm * p.fwhm;
    for (std::size_t i = 0; i < axis.size(); ++i) {
      const double d = axis[i] - p.center;
      out[i] += p.offset + p.amplitude * h2 / (d * d + h2);
    }
  }
  return out;
}

double r_squared(std::span<const double> y, std::span<const double> y_fit) {
  if (y.size() != y_fit.size()) throw ParameterError("r_squared: length mismatch");
  if (y.size() < 2) throw ParameterError("r_squared: need at least 2 points");
  const double mean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
  double ss_tot = 0.0, ss_res = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    ss_tot += (y[i] - mean) * (y[i] - mean);
    ss_res += (y[i] - y_fit[i]) * (y[i] - y_fit[i]);
  }
  if (!(ss_tot > 0)) throw DegenerateInputError("r_squared: y has zero variance");
  return 1.0 - ss_res / ss_tot;
}

std::vector<LorentzianPeak> default_init(std::span<const double> spectrum, const FreqAxis& axis, int n_peaks,
                                         double min_separation) {
  const std::size_t n = spectrum.size();
  if (n != axis.size()) throw ParameterError("default_init: spectrum length must equal axis length");
  std::vector<std::size_t> maxima;
  for (std::size_t i = 1; i + 1 < n; ++i)
    if (spectrum[i] > spectrum[i - 1] && spectrum[i] >= spectrum[i + 1]) maxima.push_back(i);
  std::stable_sort(maxima.begin(), maxima.end(),
                   [&](std::size_t a, std::size_t b) { return spectrum[a] > spectrum[b]; });

  std::vector<double> sorted(spectrum.begin(), spectrum.end());
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<long>(n / 2), sorted.end());
  const double level = sorted[n / 2];

  std::vector<LorentzianPeak> peaks;
  for (std::size_t i : maxima) {
    if (static_cast<int>(peaks.size()) == n_peaks) break;
    const bool clear = std::all_of(peaks.begin(), peaks.end(), [&](const LorentzianPeak& p) {
      return std::abs(p.center - axis[i]) >= min_separation;
    });
    if (!clear || spectrum[i] <= level) continue;
    peaks.push_back({spectrum[i] - level, axis[i], 1.0, 0.0});
  }
  if (static_cast<int>(peaks.size()) < n_peaks)
    throw DegenerateInputError("default_init: found " + std::to_string(peaks.size()) + " of " +
                               std::to_string(n_peaks) + " peaks");
  std::sort(peaks.begin(), peaks.end(), [](const auto& a, const auto& b) { return a.center < b.center; });
  peaks.front().offset = level;
  return peaks;
}

namespace {

// Parameter layout: [offset, A_0, c_0, G_0, A_1, c_1, G_1, ...]
Vector pack(std::span<const LorentzianPeak> peaks) {
  Vector x(1 + 3 * static_cast<Eigen::Index>(peaks.size()));
  double offset = 0.0;
  for (std::size_t k = 0; k < peaks.size(); ++k) {
    offset += peaks[k].offset;
    x[1 + 3 * k] = peaks[k].amplitude;
    x[2 + 3 * k] = peaks[k].center;
    x[3 + 3 * k] = peaks[k].fwhm;
  }
  x[0] = offset;
  return x;
}

std::vector<LorentzianPeak> unpack(const Vector& x) {
  const std::size_t n = static_cast<std::size_t>((x.size() - 1) / 3);
  std::vector<LorentzianPeak> peaks(n);
  for (std::size_t k = 0; k < n; ++k)
    peaks[k] = {x[1 + 3 * k], x[2 + 3 * k], std::abs(x[3 + 3 * k]), k == 0 ? x[0] : 0.0};
  return peaks;
}

struct LorentzModel {
  std::span<const double> nu;
  std::span<const double> y;

  Vector residual(const Vector& x) const {
    const Eigen::Index m = static_cast<Eigen::Index>(nu.size());
    const Eigen::Index np = (x.size() - 1) / 3;
    Vector r = Vector::Constant(m, x[0]);
    for (Eigen::Index k = 0; k < np; ++k) {
      const double a = x[1 + 3 * k], c = x[2 + 3 * k], h = 0.5 * x[3 + 3 * k];
      const double h2 = h * h;
      for (Eigen::Index i = 0; i < m; ++i) {
        const double d = nu[i] - c;
        r[i] += a * h2 / (d * d + h2);
      }
    }
    for (Eigen::Index i = 0; i < m; ++i) r[i] -= y[i];
    return r;
  }

  Matrix jacobian(const Vector& x) const {
    const Eigen::Index m = static_cast<Eigen::Index>(nu.size());
    const Eigen::Index np = (x.size() - 1) / 3;
    Matrix j(m, x.size());
    j.col(0).setOnes();
    for (Eigen::Index k = 0; k < np; ++k) {
      const double a = x[1 + 3 * k], c = x[2 + 3 * k], h = 0.5 * x[3 + 3 * k];
      const double h2 = h * h;
      for (Eigen::Index i = 0; i < m; ++i) {
        const double d = nu[i] - c;
        const double den = d * d + h2;
        const double l = h2 / den;
        j(i, 1 + 3 * k) = l;
        j(i, 2 + 3 * k) = a * 2.0 * d * h2 / (den * den);
        j(i, 3 + 3 * k) = a * h * d * d / (den * den);
      }
    }
    return j;
  }
};

bool peaks_valid(const std::vector<LorentzianPeak>& peaks, const FreqAxis& axis) {
  return std::all_of(peaks.begin(), peaks.end(), [&](const LorentzianPeak& p) {
    return p.amplitude > 0 && p.fwhm > 0 && p.center >= axis.front() && p.center <= axis.back() &&
           std::isfinite(p.amplitude + p.center + p.fwhm + p.offset);
  });
}

}  // namespace

SpectrumFit fit_brillouin_spectrum(std::span<const double> spectrum, const FreqAxis& axis,
                                   std::span<const LorentzianPeak> init, const ShiftConvention& conv,
                                   const LmConfig& lm) {
  if (spectrum.size() != axis.size())
    throw ParameterError("fit_brillouin_spectrum: spectrum length must equal axis length");
  SpectrumFit out;
  std::vector<LorentzianPeak> start(init.begin(), init.end());
  try {
    if (start.empty()) start = default_init(spectrum, axis);
    const LorentzModel model{axis.span(), spectrum};
    const LmResult res = lm_fit([&](const Vector& x) { return model.residual(x); },
                                [&](const Vector& x) { return model.jacobian(x); }, pack(start), lm);
    out.peaks = unpack(res.params);
    std::sort(out.peaks.begin(), out.peaks.end(), [](const auto& a, const auto& b) { return a.center < b.center; });
    // keep the shared offset on the first peak after sorting
    double offset = 0.0;
    for (auto& p : out.peaks) offset += std::exchange(p.offset, 0.0);
    out.peaks.front().offset = offset;

    out.model = lorentzian_eval(out.peaks, axis);
    auto& est = out.estimate;
    est.r2 = r_squared(spectrum, out.model);
    est.converged = res.converged && peaks_valid(out.peaks, axis);

    // Propagate the parameter covariance through the shift/width averages.
    const double n = static_cast<double>(out.peaks.size());
    const Eigen::Index np = (res.params.size() - 1) / 3;
    Vector g_shift = Vector::Zero(res.params.size());
    Vector g_width = Vector::Zero(res.params.size());
    for (Eigen::Index k = 0; k < np; ++k) {
      const double c = res.params[2 + 3 * k];
      est.shift += conv.shift_of(c) / n;
      est.width += std::abs(res.params[3 + 3 * k]) / n;
      g_shift[2 + 3 * k] = conv.shift_slope(c) / n;
      g_width[3 + 3 * k] = (res.params[3 + 3 * k] >= 0 ? 1.0 : -1.0) / n;
    }
    est.shift_err = std::sqrt(std::max(0.0, g_shift.dot(res.covariance * g_shift)));
    est.width_err = std::sqrt(std::max(0.0, g_width.dot(res.covariance * g_width)));
  } catch (const std::runtime_error&) {
    out.peaks = start;
    out.estimate = {};
    out.model.assign(axis.size(), 0.0);
  }
  return out;
}

std::vector<std::size_t> fit_channels(const HyperCube& cube) {
  std::vector<std::pair<double, double>> windows;
  if (auto it = cube.meta().find(kExcludedWindowsKey); it != cube.meta().end()) {
    std::stringstream ss(it->second);
    for (std::string w; std::getline(ss, w, ';');) {
      const auto colon = w.find(':');
      try {
        if (colon == std::string::npos) throw std::invalid_argument(w);
        windows.emplace_back(std::stod(w.substr(0, colon)), std::stod(w.substr(colon + 1)));
      } catch (const std::logic_error&) {
        throw ParameterError("fit_cube: bad " + std::string(kExcludedWindowsKey) + " entry '" + w + "'");
      }
    }
  }
  std::vector<std::size_t> keep;
  for (std::size_t k = 0; k < cube.channels(); ++k) {
    const double v = cube.axis()[k];
    if (std::none_of(windows.begin(), windows.end(), [&](const auto& w) { return v >= w.first && v <= w.second; }))
      keep.push_back(k);
  }
  return keep;
}

FitMaps fit_cube(const HyperCube& cube, std::span<const LorentzianPeak> init, const ShiftConvention& conv,
                 double r2_accept, double r2_replace) {
  const std::size_t n = cube.pixels();
  const std::vector<std::size_t> keep = fit_channels(cube);
  const bool all = keep.size() == cube.channels();
  std::vector<double> sub_axis;
  for (std::size_t k : keep) sub_axis.push_back(cube.axis()[k]);
  const FreqAxis axis = all ? cube.axis() : FreqAxis(sub_axis);
  std::vector<double> shift(n), width(n), r2(n);
  parallel_for(n, [&](std::size_t begin, std::size_t end) {
    std::vector<double> buf(keep.size());
    for (std::size_t i = begin; i < end; ++i) {
      std::span<const double> spec = cube.row(i);
      if (!all) {
        for (std::size_t k = 0; k < keep.size(); ++k) buf[k] = spec[keep[k]];
        spec = buf;
      }
      const auto fit = fit_brillouin_spectrum(spec, axis, init, conv);
      shift[i] = fit.estimate.shift;
      width[i] = fit.estimate.width;
      r2[i] = fit.estimate.converged ? fit.estimate.r2 : 0.0;
    }
  });

  // Global fallback: mean over accepted pixels, or over the pixels that keep
  // their own fit when none reaches r2_accept. NaN only if every pixel fails.
  auto mean_over = [&](double floor) {
    double ss = 0.0, sw = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (r2[i] >= floor && std::isfinite(shift[i]) && std::isfinite(width[i])) {
        ss += shift[i];
        sw += width[i];
        ++count;
      }
    }
    return count ? std::pair{ss / static_cast<double>(count), sw / static_cast<double>(count)}
                 : std::pair{std::nan(""), std::nan("")};
  };
  auto [global_shift, global_width] = mean_over(r2_accept);
  if (std::isnan(global_shift)) std::tie(global_shift, global_width) = mean_over(r2_replace);

  FitMaps maps;
  maps.replaced.assign(n, false);
  std::vector<std::size_t> recent;  // indices of the last two accepted pixels
  for (std::size_t i = 0; i < n; ++i) {
    if (r2[i] < r2_replace) {
      if (recent.size() == 2) {
        shift[i] = 0.5 * (shift[recent[0]] + shift[recent[1]]);
        width[i] = 0.5 * (width[recent[0]] + width[recent[1]]);
      } else {
        shift[i] = global_shift;
        width[i] = global_width;
      }
      maps.replaced[i] = true;
    } else if (r2[i] >= r2_accept) {
      recent.push_back(i);
      if (recent.size() > 2) recent.erase(recent.begin());
    }
  }
  maps.shift = FloatGrid(cube.nx(), cube.ny(), std::move(shift));
  maps.width = FloatGrid(cube.nx(), cube.ny(), std::move(width));
  maps.r2 = FloatGrid(cube.nx(), cube.ny(), std::move(r2));
  return maps;
}

BootstrapErrors bootstrap_errors(std::span<const double> spectrum, const FreqAxis& axis,
                                 std::span<const LorentzianPeak> init, int n_resamples, std::uint64_t seed,
                                 const ShiftConvention& conv) {
  if (n_resamples < 100) throw ParameterError("bootstrap_errors: n_resamples must be >= 100");
  const auto base = fit_brillouin_spectrum(spectrum, axis, init, conv);
  if (!base.estimate.converged) throw ConvergenceError("bootstrap_errors: initial fit did not converge");

  const std::size_t m = spectrum.size();
  std::vector<double> resid(m);
  for (std::size_t i = 0; i < m; ++i) resid[i] = spectrum[i] - base.model[i];

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, m - 1);
  std::vector<double> shifts, widths, sample(m);
  BootstrapErrors out;
  for (int b = 0; b < n_resamples; ++b) {
    for (std::size_t i = 0; i < m; ++i) sample[i] = base.model[i] + resid[pick(rng)];
    const auto fit = fit_brillouin_spectrum(sample, axis, base.peaks, conv);
    if (!fit.estimate.converged) {
      ++out.failed;
      continue;
    }
    shifts.push_back(fit.estimate.shift);
    widths.push_back(fit.estimate.width);
  }
  if (out.failed > n_resamples / 5)
    throw ConvergenceError("bootstrap_errors: " + std::to_string(out.failed) + " of " + std::to_string(n_resamples) +
                           " refits failed");

  auto sample_sd = [](const std::vector<double>& v) {
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
  };
  out.shift_err = sample_sd(shifts);
  out.width_err = sample_sd(widths);
  return out;
}

}  // namespace brim
