#pragma once

#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "brim/hsdata.hpp"

namespace brim {

struct FreqWindow {
  double lo = 0.0;
  double hi = 0.0;
  bool contains(double v) const { return v >= lo && v <= hi; }
};

struct BaselineConfig {
  int poly_order = 5;
  int max_iter = 100;
  double tol = 1e-4;
  // Masked from the baseline fit and zeroed in the output (Rayleigh lines).
  std::vector<FreqWindow> exclusion_windows;

  // +-1.5 GHz around the elastic lines at 0 and at fsr, clipped to the axis.
  static BaselineConfig with_rayleigh_mask(const FreqAxis& axis, double fsr, double half_width = 1.5);
};

struct BaselineFit {
  std::vector<double> baseline;
  std::vector<double> corrected;  // spectrum - baseline, masked points zeroed
  int iterations = 0;
};

// Iterative modified polynomial fit: fit, clip the working curve to the fit
// wherever it lies above, refit until the largest relative change is below tol.
// Throws ParameterError when the fit is underdetermined.
BaselineFit fit_baseline(std::span<const double> spectrum, const FreqAxis& axis, const BaselineConfig& cfg);
std::vector<double> subtract_baseline(std::span<const double> spectrum, const FreqAxis& axis,
                                      const BaselineConfig& cfg);

// Zero mean, unit sample standard deviation (n - 1 denominator).
std::vector<double> snv_normalize(std::span<const double> spectrum);

// Local least-squares polynomial smoothing over a centred window. Near the
// edges the window is shifted inward so it keeps its full length.
std::vector<double> smooth(std::span<const double> spectrum, int window = 7, int poly_order = 2);

// new(v) = old(v - delta) by linear interpolation, edge values held constant.
std::vector<double> shift_spectrum(std::span<const double> spectrum, const FreqAxis& axis, double delta);

// Intensity-weighted mean frequency inside the window after removing the
// straight line through the window's end samples. Negative excess is ignored.
double peak_centroid(std::span<const double> spectrum, const FreqAxis& axis, FreqWindow window);

struct StitchResult {
  HyperCube cube;
  std::vector<double> offsets;  // frequency shift applied to each strip, GHz
};

// Splits a cube into n bands of rows; band s holds rows [s*ny/n, (s+1)*ny/n).
std::vector<HyperCube> split_strips(const HyperCube& cube, std::size_t n);

// Aligns every strip's reference peak with the first strip's and concatenates
// the strips along y. reference_masks, when given, holds one per-pixel flag
// vector per strip selecting the pixels that show only the reference medium;
// otherwise every pixel contributes.
StitchResult correct_drift_stitch(const std::vector<HyperCube>& strips, FreqWindow reference_window,
                                  const std::vector<std::vector<bool>>& reference_masks = {});

// Applies baseline subtraction, optional smoothing and optional SNV to every
// spectrum of a cube.
struct PreprocessOptions {
  std::optional<BaselineConfig> baseline;
  std::optional<std::pair<int, int>> smoothing;  // (window, poly order)
  bool snv = false;
};
HyperCube preprocess_cube(const HyperCube& cube, const PreprocessOptions& opts);

}  // namespace brim
