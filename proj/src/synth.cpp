#include "brim/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "brim/error.hpp"
#include "brim/parallel.hpp"

namespace brim {

PhantomSpec PhantomSpec::phantom() {
  PhantomSpec s;
  s.endmembers = {{"hydrogel", 7.194, 1.31, 100.0}, {"polystyrene", 13.30, 0.92, 100.0}};
  return s;
}

PhantomSpec PhantomSpec::cell() {
  PhantomSpec s;
  s.geometry = Geometry::Cell;
  s.nx = 45;
  s.ny = 50;
  s.center_x = 22.0;
  s.center_y = 24.5;
  s.interface_px = 1.0;
  s.endmembers = {{"pbs", 7.19, 1.34, 100.0}, {"cytoplasm", 7.65, 1.83, 100.0}, {"lipids", 7.90, 2.58, 100.0}};
  return s;
}

namespace {

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ParameterError("phantom spec: " + key + " expects a number, got '" + v + "'");
  }
}

std::size_t to_size(const std::string& key, const std::string& v) {
  const double d = to_double(key, v);
  if (d < 0 || d != std::floor(d)) throw ParameterError("phantom spec: " + key + " expects a nonnegative integer");
  return static_cast<std::size_t>(d);
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

void PhantomSpec::set(const std::string& key, const std::string& value) {
  if (key == "preset") {
    if (value == "phantom")
      *this = phantom();
    else if (value == "cell")
      *this = cell();
    else
      throw ParameterError("phantom spec: unknown preset '" + value + "' (phantom, cell)");
  } else if (key == "nx") {
    nx = to_size(key, value);
  } else if (key == "ny") {
    ny = to_size(key, value);
  } else if (key == "ns") {
    ns = to_size(key, value);
  } else if (key == "fsr") {
    fsr = to_double(key, value);
  } else if (key == "center_x") {
    center_x = to_double(key, value);
  } else if (key == "center_y") {
    center_y = to_double(key, value);
  } else if (key == "radius") {
    radius = to_double(key, value);
  } else if (key == "cell_rx") {
    cell_rx = to_double(key, value);
  } else if (key == "cell_ry") {
    cell_ry = to_double(key, value);
  } else if (key == "droplets") {
    droplets = static_cast<int>(to_size(key, value));
  } else if (key == "droplet_rmin") {
    droplet_rmin = to_double(key, value);
  } else if (key == "droplet_rmax") {
    droplet_rmax = to_double(key, value);
  } else if (key == "interface_px") {
    interface_px = to_double(key, value);
  } else if (key == "background") {
    background = to_double(key, value);
  } else if (key == "rayleigh_amplitude") {
    rayleigh_amplitude = to_double(key, value);
  } else if (key == "noise_sigma") {
    noise_sigma = to_double(key, value);
  } else if (key == "drift_rate") {
    drift_rate = to_double(key, value);
  } else if (key == "stripes") {
    stripes = static_cast<int>(to_size(key, value));
  } else if (key == "stripe_drift") {
    stripe_drift = to_double(key, value);
  } else if (key == "stray_probability") {
    stray_probability = to_double(key, value);
  } else if (key == "saturation") {
    saturation = to_double(key, value);
  } else if (key == "seed") {
    seed = static_cast<std::uint64_t>(std::stoull(value));
  } else if (key.rfind("endmember.", 0) == 0) {
    const std::size_t k = to_size(key, key.substr(10));
    std::vector<std::string> parts;
    std::stringstream ss(value);
    for (std::string part; std::getline(ss, part, ':');) parts.push_back(trim(part));
    if (parts.size() < 3 || parts.size() > 4)
      throw ParameterError("phantom spec: " + key + " expects name:shift:width[:amplitude]");
    EndmemberDef e{parts[0], to_double(key, parts[1]), to_double(key, parts[2]), 100.0};
    if (parts.size() == 4) e.amplitude = to_double(key, parts[3]);
    if (endmembers.size() <= k) endmembers.resize(k + 1);
    endmembers[k] = e;
  } else {
    throw ParameterError("phantom spec: unknown key '" + key + "'");
  }
}

PhantomSpec load_phantom_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  PhantomSpec spec = PhantomSpec::phantom();
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(path.string(), lineno, "expected key = value");
    try {
      spec.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const ParameterError& e) {
      throw ParseError(path.string(), lineno, e.what());
    }
  }
  return spec;
}

namespace {

double lorentz(double v, double center, double fwhm) {
  const double g = 0.5 * fwhm;
  return g * g / ((v - center) * (v - center) + g * g);
}

std::mt19937_64 pixel_stream(std::uint64_t seed, std::size_t pixel, std::uint32_t tag) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(pixel), static_cast<std::uint32_t>(std::uint64_t{pixel} >> 32), tag};
  return std::mt19937_64(seq);
}

double ramp(double signed_dist, double band) {
  if (band <= 0) return signed_dist <= 0 ? 1.0 : 0.0;
  return std::clamp(0.5 - signed_dist / band, 0.0, 1.0);
}

void validate(const PhantomSpec& spec, std::size_t needed) {
  if (spec.nx == 0 || spec.ny == 0) throw ParameterError("synth: grid must be non-empty");
  if (spec.ns < 8) throw ParameterError("synth: need at least 8 channels");
  if (!(spec.fsr > 0)) throw ParameterError("synth: fsr must be positive");
  if (spec.endmembers.size() != needed)
    throw ParameterError("synth: geometry needs " + std::to_string(needed) + " endmembers, got " +
                         std::to_string(spec.endmembers.size()));
  for (const auto& e : spec.endmembers) {
    if (!(e.shift > 0 && e.shift < spec.fsr / 2))
      throw ParameterError("synth: endmember '" + e.name + "' shift must lie in (0, fsr/2)");
    if (!(e.width > 0)) throw ParameterError("synth: endmember '" + e.name + "' width must be positive");
  }
  if (spec.noise_sigma < 0) throw ParameterError("synth: noise_sigma must be >= 0");
  if (spec.stray_probability < 0 || spec.stray_probability > 1)
    throw ParameterError("synth: stray_probability must lie in [0, 1]");
  if (spec.interface_px < 0) throw ParameterError("synth: interface_px must be >= 0");
  if (spec.stripes < 1) throw ParameterError("synth: stripes must be >= 1");
}

bool disc_inside(const PhantomSpec& spec, double cx, double cy, double rx, double ry) {
  return cx - rx >= 0 && cy - ry >= 0 && cx + rx <= static_cast<double>(spec.nx - 1) &&
         cy + ry <= static_cast<double>(spec.ny - 1);
}

std::vector<Disc> droplet_layout(const PhantomSpec& spec) {
  if (!spec.droplet_discs.empty()) return spec.droplet_discs;
  std::vector<Disc> out;
  if (spec.droplets <= 0) return out;
  if (!(spec.droplet_rmin > 0 && spec.droplet_rmax >= spec.droplet_rmin))
    throw ParameterError("synth: droplet radii must satisfy 0 < rmin <= rmax");
  std::mt19937_64 rng(spec.seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_real_distribution<double> rad(spec.droplet_rmin, spec.droplet_rmax);
  for (int attempt = 0; attempt < 10000 && static_cast<int>(out.size()) < spec.droplets; ++attempt) {
    const double u = unit(rng), v = unit(rng), r = rad(rng);
    if (u * u + v * v > 1.0) continue;
    // keep each droplet clear of the cell edge by its radius plus one pixel
    const double cx = spec.center_x + u * (spec.cell_rx - r - 1.0);
    const double cy = spec.center_y + v * (spec.cell_ry - r - 1.0);
    const double ex = (cx - spec.center_x) / spec.cell_rx, ey = (cy - spec.center_y) / spec.cell_ry;
    if (std::sqrt(ex * ex + ey * ey) * std::min(spec.cell_rx, spec.cell_ry) + r + 1.0 > std::min(spec.cell_rx, spec.cell_ry))
      continue;
    bool clear = true;
    for (const Disc& d : out)
      if (std::hypot(cx - d.cx, cy - d.cy) < r + d.r + 1.0) clear = false;
    if (clear) out.push_back({cx, cy, r});
  }
  return out;
}

std::vector<double> abundances_with(const PhantomSpec& spec, const std::vector<Disc>& discs, double x, double y) {
  const double band = spec.interface_px;
  if (spec.geometry == PhantomSpec::Geometry::Sphere) {
    const double inside = spec.radius > 0 ? ramp(std::hypot(x - spec.center_x, y - spec.center_y) - spec.radius, band)
                                          : 0.0;
    return {1.0 - inside, inside};
  }
  const double ex = (x - spec.center_x) / spec.cell_rx, ey = (y - spec.center_y) / spec.cell_ry;
  const double cell = ramp((std::sqrt(ex * ex + ey * ey) - 1.0) * std::min(spec.cell_rx, spec.cell_ry), band);
  double drop = 0.0;
  for (const Disc& d : discs) drop = std::max(drop, ramp(std::hypot(x - d.cx, y - d.cy) - d.r, band));
  const double lipid = std::min(drop, cell);
  return {1.0 - cell, cell - lipid, lipid};
}

void check_geometry(const PhantomSpec& spec, const std::vector<Disc>& discs) {
  if (spec.geometry == PhantomSpec::Geometry::Sphere) {
    if (spec.radius < 0) throw ParameterError("synth: radius must be >= 0");
    if (spec.radius > 0 && !disc_inside(spec, spec.center_x, spec.center_y, spec.radius, spec.radius))
      throw ParameterError("synth: sphere exceeds the grid");
    return;
  }
  if (!(spec.cell_rx > 0 && spec.cell_ry > 0)) throw ParameterError("synth: cell semi-axes must be positive");
  if (!disc_inside(spec, spec.center_x, spec.center_y, spec.cell_rx, spec.cell_ry))
    throw ParameterError("synth: cell ellipse exceeds the grid");
  for (const Disc& d : discs)
    if (!disc_inside(spec, d.cx, d.cy, d.r, d.r)) throw ParameterError("synth: droplet exceeds the grid");
}

SynthResult generate(const PhantomSpec& spec) {
  const std::size_t n_end = spec.geometry == PhantomSpec::Geometry::Sphere ? 2 : 3;
  validate(spec, n_end);
  const std::vector<Disc> discs =
      spec.geometry == PhantomSpec::Geometry::Cell ? droplet_layout(spec) : std::vector<Disc>{};
  check_geometry(spec, discs);

  const FreqAxis axis = FreqAxis::linspace(0.0, spec.fsr, spec.ns);
  const std::size_t n = spec.nx * spec.ny;
  const auto ns = static_cast<Eigen::Index>(spec.ns);

  SynthTruth truth;
  truth.endmembers = spec.endmembers;
  truth.abundances.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n_end));
  truth.clean.resize(static_cast<Eigen::Index>(n), ns);
  truth.stray.assign(n, false);
  std::vector<int> regions(n);
  Matrix data(static_cast<Eigen::Index>(n), ns);

  double max_amp = 0.0;
  for (const auto& e : spec.endmembers) max_amp = std::max(max_amp, e.amplitude);
  const double sigma = spec.noise_sigma * max_amp;

  parallel_for(n, [&](std::size_t begin, std::size_t end) {
    std::vector<double> shifted(spec.ns);
    for (std::size_t i = begin; i < end; ++i) {
      const auto row = static_cast<Eigen::Index>(i);
      const double x = static_cast<double>(i % spec.nx), y = static_cast<double>(i / spec.nx);
      const std::vector<double> a = abundances_with(spec, discs, x, y);
      int best = 0;
      for (std::size_t k = 0; k < n_end; ++k) {
        truth.abundances(row, static_cast<Eigen::Index>(k)) = a[k];
        if (a[k] > a[static_cast<std::size_t>(best)]) best = static_cast<int>(k);
      }
      regions[i] = best;

      const std::size_t yi = i / spec.nx;
      const auto stripe = static_cast<double>(yi * static_cast<std::size_t>(spec.stripes) / spec.ny);
      const double delta = spec.drift_rate * y + spec.stripe_drift * stripe;

      std::mt19937_64 noise = pixel_stream(spec.seed, i, 1);
      std::mt19937_64 events = pixel_stream(spec.seed, i, 2);
      std::normal_distribution<double> gauss(0.0, 1.0);
      std::bernoulli_distribution stray(spec.stray_probability);
      const bool hit = spec.stray_probability > 0 && stray(events);
      truth.stray[i] = hit;

      for (Eigen::Index c = 0; c < ns; ++c) {
        const double v = axis[static_cast<std::size_t>(c)];
        auto signal = [&](double off) {
          double s = spec.background;
          for (std::size_t k = 0; k < n_end; ++k) {
            const auto& e = spec.endmembers[k];
            s += a[k] * e.amplitude * (lorentz(v, e.shift + off, e.width) + lorentz(v, spec.fsr - e.shift + off, e.width));
          }
          if (spec.rayleigh_amplitude > 0)
            s += spec.rayleigh_amplitude * (lorentz(v, off, 0.3) + lorentz(v, spec.fsr + off, 0.3));
          return s;
        };
        truth.clean(row, c) = signal(0.0);
        double s = delta != 0.0 ? signal(delta) : truth.clean(row, c);
        if (sigma > 0) s += sigma * gauss(noise);
        if (hit) s = std::min(s + 4.0 * spec.saturation * (lorentz(v, 0.0, 8.0) + lorentz(v, spec.fsr, 8.0)), spec.saturation);
        data(row, c) = std::max(s, 0.0);
      }
    }
  });

  truth.regions = LabelMap(spec.nx, spec.ny, std::move(regions));
  Metadata meta{{"generator", spec.geometry == PhantomSpec::Geometry::Sphere ? "phantom" : "cell"},
                {"seed", std::to_string(spec.seed)},
                {"noise_sigma", format_value(spec.noise_sigma)},
                {"noise_sigma_note", "assumed noise level, not measured"}};
  for (std::size_t k = 0; k < n_end; ++k) {
    const auto& e = spec.endmembers[k];
    meta["endmember." + std::to_string(k)] =
        e.name + ":" + format_value(e.shift) + ":" + format_value(e.width) + ":" + format_value(e.amplitude);
  }
  return {HyperCube(spec.nx, spec.ny, axis, std::move(data), std::move(meta)), std::move(truth)};
}

}  // namespace

std::vector<double> abundances_at(const PhantomSpec& spec, double x, double y) {
  const std::vector<Disc> discs =
      spec.geometry == PhantomSpec::Geometry::Cell ? droplet_layout(spec) : std::vector<Disc>{};
  return abundances_with(spec, discs, x, y);
}

SynthResult synth_phantom(const PhantomSpec& spec) {
  if (spec.geometry != PhantomSpec::Geometry::Sphere) throw ParameterError("synth_phantom: spec is not a sphere layout");
  return generate(spec);
}

SynthResult synth_cell(const PhantomSpec& spec) {
  if (spec.geometry != PhantomSpec::Geometry::Cell) throw ParameterError("synth_cell: spec is not a cell layout");
  return generate(spec);
}

SynthResult synthesize(const PhantomSpec& spec) { return generate(spec); }

std::vector<LorentzianPeak> endmember_peaks(const PhantomSpec& spec, std::size_t k) {
  if (k >= spec.endmembers.size()) throw ParameterError("endmember_peaks: index out of range");
  const auto& e = spec.endmembers[k];
  return {{e.amplitude, e.shift, e.width, spec.background}, {e.amplitude, spec.fsr - e.shift, e.width, 0.0}};
}

HyperCube add_noise(const HyperCube& cube, double sigma, std::uint64_t seed) {
  if (sigma < 0) throw ParameterError("add_noise: sigma must be >= 0");
  if (sigma == 0) return cube;
  const double scale = sigma * cube.data().maxCoeff();
  Matrix data = cube.data();
  parallel_for(cube.pixels(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      std::mt19937_64 rng = pixel_stream(seed, i, 3);
      std::normal_distribution<double> gauss(0.0, 1.0);
      auto row = data.row(static_cast<Eigen::Index>(i));
      for (Eigen::Index c = 0; c < row.size(); ++c) row[c] = std::max(row[c] + scale * gauss(rng), 0.0);
    }
  });
  HyperCube out = cube.with_data(std::move(data));
  Metadata meta = out.meta();
  meta["noise_sigma"] = format_value(sigma);
  meta["noise_seed"] = std::to_string(seed);
  return out.with_meta(std::move(meta));
}

FloatGrid synth_brightfield(const PhantomSpec& spec, std::size_t factor, const std::vector<double>& levels,
                            double noise_sigma, std::uint64_t seed) {
  if (factor == 0) throw ParameterError("synth_brightfield: factor must be >= 1");
  const std::vector<Disc> discs =
      spec.geometry == PhantomSpec::Geometry::Cell ? droplet_layout(spec) : std::vector<Disc>{};
  const std::size_t w = spec.nx * factor, h = spec.ny * factor;
  std::vector<double> img(w * h);
  const double f = static_cast<double>(factor);
  for (std::size_t yy = 0; yy < h; ++yy) {
    std::mt19937_64 rng = pixel_stream(seed, yy, 4);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (std::size_t xx = 0; xx < w; ++xx) {
      // sub-pixel centres so that a block of factor x factor samples averages
      // over the footprint of one cube pixel
      const double x = (static_cast<double>(xx) + 0.5) / f - 0.5, y = (static_cast<double>(yy) + 0.5) / f - 0.5;
      const std::vector<double> a = abundances_with(spec, discs, x, y);
      if (levels.size() < a.size()) throw ParameterError("synth_brightfield: need one gray level per endmember");
      double v = 0.0;
      for (std::size_t k = 0; k < a.size(); ++k) v += a[k] * levels[k];
      img[yy * w + xx] = v + noise_sigma * gauss(rng);
    }
  }
  return FloatGrid(w, h, std::move(img));
}

}  // namespace brim
