#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "brim/hsdata.hpp"
#include "brim/numerics.hpp"

namespace brim {

// offset + amplitude * (fwhm/2)^2 / ((v - center)^2 + (fwhm/2)^2)
struct LorentzianPeak {
  double amplitude = 0.0;
  double center = 0.0;
  double fwhm = 1.0;
  double offset = 0.0;
};

// Where the elastic line sits on the axis, which fixes how a fitted peak
// centre converts into a Brillouin shift.
//   Centered: anti-Stokes and Stokes at midpoint -+ shift.
//   Fsr:      elastic orders at 0 and fsr, peaks at shift and fsr - shift.
struct ShiftConvention {
  enum class Layout { Centered, Fsr };
  Layout layout = Layout::Fsr;
  double fsr = 30.0;
  double midpoint = 0.0;

  static ShiftConvention centered(double midpoint = 0.0) { return {Layout::Centered, 0.0, midpoint}; }
  static ShiftConvention fsr_edges(double fsr) { return {Layout::Fsr, fsr, fsr / 2}; }

  double shift_of(double center) const;
  // d shift / d center, +-1
  double shift_slope(double center) const;
};

struct BrillouinEstimate {
  double shift = 0.0;
  double width = 0.0;
  double shift_err = 0.0;
  double width_err = 0.0;
  double r2 = 0.0;
  bool converged = false;
};

struct SpectrumFit {
  std::vector<LorentzianPeak> peaks;
  BrillouinEstimate estimate;
  std::vector<double> model;  // fitted curve on the axis
};

// Sum over peaks of offset + Lorentzian; linear in amplitudes and offsets.
std::vector<double> lorentzian_eval(std::span<const LorentzianPeak> peaks, const FreqAxis& axis);

// Throws DegenerateInputError on zero variance in y.
double r_squared(std::span<const double> y, std::span<const double> y_fit);

// Peaks at the n largest local maxima that are at least min_separation GHz
// apart; amplitude measured above the spectrum median, fwhm 1 GHz, the shared
// offset on the first peak. Throws DegenerateInputError if too few maxima.
std::vector<LorentzianPeak> default_init(std::span<const double> spectrum, const FreqAxis& axis, int n_peaks = 2,
                                         double min_separation = 2.0);

// Least-squares Lorentzian fit with a shared offset. The reported shift is the
// mean over peaks of shift_of(center), the width the mean fwhm. A failed fit
// comes back with converged = false and r2 = 0. Empty init uses default_init.
SpectrumFit fit_brillouin_spectrum(std::span<const double> spectrum, const FreqAxis& axis,
                                   std::span<const LorentzianPeak> init, const ShiftConvention& conv = {},
                                   const LmConfig& lm = {});

struct FitMaps {
  FloatGrid shift;
  FloatGrid width;
  FloatGrid r2;
  std::vector<bool> replaced;
};

// Cube metadata key listing frequency windows ("lo:hi;lo:hi", GHz) that
// preprocessing zeroed; fit_cube leaves those channels out of every fit.
inline constexpr const char* kExcludedWindowsKey = "excluded_windows";

// Per-pixel fits. Afterwards, in raster order, a pixel with r2 < r2_replace
// takes the mean shift and width of the two most recent pixels with
// r2 >= r2_accept, or the mean over all accepted pixels when fewer than two
// precede it. With no accepted pixel at all, that mean runs over the pixels
// with r2 >= r2_replace instead.
FitMaps fit_cube(const HyperCube& cube, std::span<const LorentzianPeak> init = {}, const ShiftConvention& conv = {},
                 double r2_accept = 0.95, double r2_replace = 0.8);

struct BootstrapErrors {
  double shift_err = 0.0;
  double width_err = 0.0;
  int failed = 0;
};

// Residual bootstrap: fit, resample residuals with replacement, refit and take
// the sample standard deviation of shift and width. Throws ConvergenceError if
// more than 20% of refits fail, ParameterError for n_resamples < 100.
BootstrapErrors bootstrap_errors(std::span<const double> spectrum, const FreqAxis& axis,
                                 std::span<const LorentzianPeak> init, int n_resamples, std::uint64_t seed,
                                 const ShiftConvention& conv = {});

}  // namespace brim
