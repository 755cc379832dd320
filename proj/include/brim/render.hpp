#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "brim/hsdata.hpp"

namespace brim {

using Rgb = std::array<std::uint8_t, 3>;

struct ColorMap {
  enum class Kind { Viridis, Bicolor };
  Kind kind = Kind::Viridis;
  Rgb low{0, 0, 0};     // bicolor endpoints
  Rgb high{255, 255, 255};
  std::optional<double> lo;  // explicit range; both or neither
  std::optional<double> hi;
  // Percentile clipping for auto ranges, e.g. 2 -> (p2, p98). 0 = min/max.
  double clip_percent = 0.0;

  static ColorMap viridis() { return {}; }
  static ColorMap bicolor(Rgb a, Rgb b) { return {Kind::Bicolor, a, b, {}, {}, 0.0}; }

  Rgb map(double t) const;  // t in [0, 1]
};

// "viridis[:lo:hi]" or "bicolor:COLOR:COLOR[:lo:hi]". Throws ParameterError.
ColorMap parse_colormap(const std::string& spec);

// "#rrggbb" or "rrggbb", or a name: red green blue cyan magenta yellow white black.
Rgb parse_color(const std::string& spec);

// Default categorical palette (Set1-like), at least 10 entries.
std::vector<Rgb> default_palette();

struct Image {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<Rgb> pixels;  // row-major, same convention as the cube
};

Image heatmap_image(const FloatGrid& grid, const ColorMap& cmap);
Image labels_image(const LabelMap& labels, const std::vector<Rgb>& palette);
Image composite_image(const std::vector<FloatGrid>& maps, const std::vector<Rgb>& colors);

// Binary P6, maxval 255. Throws IoError.
void write_ppm(const Image& image, const std::filesystem::path& path);
Image read_ppm(const std::filesystem::path& path);

void render_heatmap(const FloatGrid& grid, const ColorMap& cmap, const std::filesystem::path& path);
void render_labels_rgb(const LabelMap& labels, const std::vector<Rgb>& palette, const std::filesystem::path& path);
void render_composite(const std::vector<FloatGrid>& maps, const std::vector<Rgb>& colors,
                      const std::filesystem::path& path);

}  // namespace brim
