#include "brim/render.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "brim/error.hpp"

namespace brim {

namespace {

// viridis sampled at nine evenly spaced stops
constexpr std::array<Rgb, 9> kViridis{{{68, 1, 84},
                                       {71, 44, 122},
                                       {59, 81, 139},
                                       {44, 113, 142},
                                       {33, 144, 141},
                                       {39, 173, 129},
                                       {92, 200, 99},
                                       {170, 220, 50},
                                       {253, 231, 37}}};

std::uint8_t lerp8(std::uint8_t a, std::uint8_t b, double t) {
  return static_cast<std::uint8_t>(std::lround(a + (static_cast<double>(b) - a) * t));
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string part; std::getline(ss, part, sep);) out.push_back(part);
  return out;
}

double parse_number(const std::string& s) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw ParameterError("colormap: '" + s + "' is not a number");
}

double percentile(std::vector<double> v, double p) {
  std::sort(v.begin(), v.end());
  const double pos = p / 100.0 * static_cast<double>(v.size() - 1);
  const auto i = static_cast<std::size_t>(std::floor(pos));
  const double frac = pos - static_cast<double>(i);
  return i + 1 < v.size() ? v[i] * (1 - frac) + v[i + 1] * frac : v[i];
}

}  // namespace

Rgb ColorMap::map(double t) const {
  t = std::clamp(t, 0.0, 1.0);
  if (kind == Kind::Bicolor) return {lerp8(low[0], high[0], t), lerp8(low[1], high[1], t), lerp8(low[2], high[2], t)};
  const double pos = t * static_cast<double>(kViridis.size() - 1);
  const auto i = std::min(static_cast<std::size_t>(pos), kViridis.size() - 2);
  const double f = pos - static_cast<double>(i);
  const Rgb& a = kViridis[i];
  const Rgb& b = kViridis[i + 1];
  return {lerp8(a[0], b[0], f), lerp8(a[1], b[1], f), lerp8(a[2], b[2], f)};
}

Rgb parse_color(const std::string& spec) {
  static const std::map<std::string, Rgb> named{{"red", {255, 0, 0}},     {"green", {0, 255, 0}},
                                                {"blue", {0, 0, 255}},    {"cyan", {0, 255, 255}},
                                                {"magenta", {255, 0, 255}}, {"yellow", {255, 255, 0}},
                                                {"white", {255, 255, 255}}, {"black", {0, 0, 0}}};
  if (auto it = named.find(spec); it != named.end()) return it->second;
  std::string hex = spec;
  if (!hex.empty() && hex[0] == '#') hex.erase(0, 1);
  if (hex.size() != 6 || hex.find_first_not_of("0123456789abcdefABCDEF") != std::string::npos)
    throw ParameterError("color: expected a name or rrggbb hex, got '" + spec + "'");
  Rgb c{};
  for (int k = 0; k < 3; ++k) c[k] = static_cast<std::uint8_t>(std::stoi(hex.substr(2 * k, 2), nullptr, 16));
  return c;
}

ColorMap parse_colormap(const std::string& spec) {
  const auto parts = split(spec, ':');
  if (parts.empty()) throw ParameterError("colormap: empty specification");
  ColorMap cmap;
  std::size_t next = 1;
  if (parts[0] == "viridis") {
    cmap = ColorMap::viridis();
  } else if (parts[0] == "bicolor") {
    if (parts.size() < 3) throw ParameterError("colormap: bicolor needs two colors, e.g. bicolor:black:cyan");
    cmap = ColorMap::bicolor(parse_color(parts[1]), parse_color(parts[2]));
    next = 3;
  } else {
    throw ParameterError("colormap: unknown map '" + parts[0] + "' (viridis, bicolor)");
  }
  if (parts.size() == next + 2) {
    cmap.lo = parse_number(parts[next]);
    cmap.hi = parse_number(parts[next + 1]);
    if (!(*cmap.lo < *cmap.hi)) throw ParameterError("colormap: range requires lo < hi");
  } else if (parts.size() != next) {
    throw ParameterError("colormap: trailing fields in '" + spec + "'");
  }
  return cmap;
}

std::vector<Rgb> default_palette() {
  return {{228, 26, 28},  {55, 126, 184},  {77, 175, 74},  {152, 78, 163}, {255, 127, 0},
          {255, 255, 51}, {166, 86, 40},   {247, 129, 191}, {153, 153, 153}, {0, 206, 209},
          {128, 0, 0},    {0, 0, 128}};
}

Image heatmap_image(const FloatGrid& grid, const ColorMap& cmap) {
  if (grid.values.size() != grid.nx * grid.ny) throw ParameterError("heatmap: grid size mismatch");
  for (double v : grid.values)
    if (!std::isfinite(v)) throw ParameterError("heatmap: grid contains non-finite values");
  double lo = 0.0, hi = 0.0;
  if (cmap.lo && cmap.hi) {
    lo = *cmap.lo;
    hi = *cmap.hi;
    if (!(lo < hi)) throw ParameterError("heatmap: explicit range requires lo < hi");
  } else if (!grid.values.empty()) {
    if (cmap.clip_percent > 0) {
      lo = percentile(grid.values, cmap.clip_percent);
      hi = percentile(grid.values, 100.0 - cmap.clip_percent);
    } else {
      const auto [a, b] = std::minmax_element(grid.values.begin(), grid.values.end());
      lo = *a;
      hi = *b;
    }
  }
  Image img{grid.nx, grid.ny, {}};
  img.pixels.reserve(grid.values.size());
  for (double v : grid.values) img.pixels.push_back(cmap.map(hi > lo ? (v - lo) / (hi - lo) : 0.0));
  return img;
}

Image labels_image(const LabelMap& labels, const std::vector<Rgb>& palette) {
  int max_label = -1;
  for (int l : labels.labels) max_label = std::max(max_label, l);
  if (max_label >= static_cast<int>(palette.size()))
    throw ParameterError("labels: palette has " + std::to_string(palette.size()) + " colors but label " +
                         std::to_string(max_label) + " is used");
  Image img{labels.nx, labels.ny, {}};
  img.pixels.reserve(labels.labels.size());
  for (int l : labels.labels) img.pixels.push_back(l < 0 ? Rgb{0, 0, 0} : palette[static_cast<std::size_t>(l)]);
  return img;
}

Image composite_image(const std::vector<FloatGrid>& maps, const std::vector<Rgb>& colors) {
  if (maps.empty()) throw ParameterError("composite: need at least one map");
  if (maps.size() != colors.size()) throw ParameterError("composite: need one base color per map");
  const std::size_t nx = maps[0].nx, ny = maps[0].ny;
  for (const auto& m : maps)
    if (m.nx != nx || m.ny != ny || m.values.size() != nx * ny)
      throw ParameterError("composite: maps have different dimensions");

  std::vector<std::array<double, 3>> acc(nx * ny, {0.0, 0.0, 0.0});
  for (std::size_t k = 0; k < maps.size(); ++k) {
    const auto& v = maps[k].values;
    for (double x : v)
      if (!std::isfinite(x)) throw ParameterError("composite: map contains non-finite values");
    const auto [a, b] = std::minmax_element(v.begin(), v.end());
    const double lo = *a, range = *b - *a;
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double t = range > 0 ? (v[i] - lo) / range : 0.0;
      for (int c = 0; c < 3; ++c) acc[i][c] += t * colors[k][c];
    }
  }
  Image img{nx, ny, {}};
  img.pixels.reserve(acc.size());
  for (const auto& p : acc) {
    Rgb px{};
    for (int c = 0; c < 3; ++c) px[c] = static_cast<std::uint8_t>(std::lround(std::min(p[c], 255.0)));
    img.pixels.push_back(px);
  }
  return img;
}

void write_ppm(const Image& image, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "P6\n" << image.width << ' ' << image.height << "\n255\n";
  for (const Rgb& p : image.pixels) out.write(reinterpret_cast<const char*>(p.data()), 3);
  if (!out) throw IoError("failed writing " + path.string());
}

Image read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string magic;
  Image img;
  int maxval = 0;
  in >> magic >> img.width >> img.height >> maxval;
  if (magic != "P6" || maxval != 255 || !in) throw ParseError(path.string(), 1, "expected a P6 header with maxval 255");
  in.get();
  img.pixels.resize(img.width * img.height);
  for (Rgb& p : img.pixels) in.read(reinterpret_cast<char*>(p.data()), 3);
  if (!in) throw ParseError(path.string(), 1, "truncated pixel data");
  return img;
}

void render_heatmap(const FloatGrid& grid, const ColorMap& cmap, const std::filesystem::path& path) {
  write_ppm(heatmap_image(grid, cmap), path);
}

void render_labels_rgb(const LabelMap& labels, const std::vector<Rgb>& palette, const std::filesystem::path& path) {
  write_ppm(labels_image(labels, palette), path);
}

void render_composite(const std::vector<FloatGrid>& maps, const std::vector<Rgb>& colors,
                      const std::filesystem::path& path) {
  write_ppm(composite_image(maps, colors), path);
}

}  // namespace brim
