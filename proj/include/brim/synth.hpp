#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "brim/fitting.hpp"
#include "brim/hsdata.hpp"

namespace brim {

// A pure material: a Lorentzian at `shift` and its mirror at fsr - shift.
struct EndmemberDef {
  std::string name;
  double shift = 0.0;  // GHz
  double width = 1.0;  // FWHM, GHz
  double amplitude = 100.0;
};

struct Disc {
  double cx = 0.0;
  double cy = 0.0;
  double r = 0.0;
};

struct PhantomSpec {
  enum class Geometry { Sphere, Cell };

  std::size_t nx = 30;
  std::size_t ny = 30;
  std::size_t ns = 200;
  double fsr = 30.0;
  Geometry geometry = Geometry::Sphere;

  // Sphere: endmember 0 outside, endmember 1 inside. Radius 0 = no sphere.
  double center_x = 14.5;
  double center_y = 14.5;
  double radius = 9.0;

  // Cell: endmember 0 background, 1 inside the ellipse, 2 inside the droplets.
  double cell_rx = 15.0;
  double cell_ry = 18.0;
  int droplets = 6;
  double droplet_rmin = 2.0;
  double droplet_rmax = 4.0;
  std::vector<Disc> droplet_discs;  // explicit discs override the seeded layout

  std::vector<EndmemberDef> endmembers;
  double interface_px = 2.0;  // width of the linear mixing ramp across a boundary
  double background = 50.0;   // flat pedestal added to every spectrum
  double rayleigh_amplitude = 0.0;
  double noise_sigma = 0.05;  // fraction of the largest endmember amplitude
  double drift_rate = 0.0;    // GHz per pixel row
  int stripes = 1;
  double stripe_drift = 0.0;  // GHz per stripe, stripes are bands of rows
  double stray_probability = 0.0;
  double saturation = 400.0;
  std::uint64_t seed = 0;

  static PhantomSpec phantom();
  static PhantomSpec cell();

  // Throws ParameterError on an unknown key or bad value.
  void set(const std::string& key, const std::string& value);
};

// key = value lines, '#' comments. "preset = phantom|cell" resets to the
// preset before later keys apply; "endmember.K = name:shift:width:amplitude".
PhantomSpec load_phantom_spec(const std::filesystem::path& path);

struct SynthTruth {
  Matrix abundances;  // pixels x endmembers, rows on the simplex
  LabelMap regions;   // argmax abundance
  std::vector<EndmemberDef> endmembers;
  Matrix clean;       // noiseless spectra before drift, noise and artefacts
  std::vector<bool> stray;
};

struct SynthResult {
  HyperCube cube;
  SynthTruth truth;
};

// Throws ParameterError when the geometry leaves the grid or endmembers are
// missing or invalid.
SynthResult synth_phantom(const PhantomSpec& spec);
SynthResult synth_cell(const PhantomSpec& spec);
// Dispatches on spec.geometry.
SynthResult synthesize(const PhantomSpec& spec);

// Abundances at a continuous position (pixel units), used for bright-field
// rendering at sub-pixel resolution.
std::vector<double> abundances_at(const PhantomSpec& spec, double x, double y);

// Peaks whose lorentzian_eval reproduces the noiseless spectrum of a pure
// pixel made of endmember k (background on the first peak).
std::vector<LorentzianPeak> endmember_peaks(const PhantomSpec& spec, std::size_t k);

// Adds N(0, (sigma * max)^2) per sample with per-pixel seeded streams, then
// clips at zero. sigma = 0 returns the cube unchanged.
HyperCube add_noise(const HyperCube& cube, double sigma, std::uint64_t seed);

// Co-registered intensity image at `factor` times the cube resolution.
// Each endmember has a gray level (levels[k]); noise_sigma is absolute.
FloatGrid synth_brightfield(const PhantomSpec& spec, std::size_t factor, const std::vector<double>& levels,
                            double noise_sigma, std::uint64_t seed);

}  // namespace brim
