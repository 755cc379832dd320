#include <doctest.h>

#include <fstream>
#include <iterator>

#include "brim/error.hpp"
#include "brim/render.hpp"
#include "util.hpp"

using namespace brim;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

const std::filesystem::path kGolden = BRIM_GOLDEN_DIR;

FloatGrid ramp_grid() {
  std::vector<double> v(6 * 4);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(i) * 0.5 - 3.0;
  return FloatGrid(6, 4, v);
}

}  // namespace

TEST_SUITE("render") {
  TEST_CASE("viridis anchors") {
    const ColorMap v = ColorMap::viridis();
    CHECK(v.map(0.0) == Rgb{68, 1, 84});
    CHECK(v.map(1.0) == Rgb{253, 231, 37});
    CHECK(v.map(0.5) == Rgb{33, 144, 141});
    CHECK(v.map(-3.0) == v.map(0.0));
  }

  TEST_CASE("bicolor interpolates linearly") {
    const ColorMap c = parse_colormap("bicolor:black:white");
    CHECK(c.map(0.5) == Rgb{128, 128, 128});
    const ColorMap h = parse_colormap("bicolor:#102030:ff0000:1:5");
    CHECK(h.low == Rgb{16, 32, 48});
    CHECK(*h.lo == 1.0);
    CHECK(*h.hi == 5.0);
  }

  TEST_CASE("colormap and color parse errors") {
    CHECK_THROWS_AS(parse_colormap("jet"), ParameterError);
    CHECK_THROWS_AS(parse_colormap("bicolor:red"), ParameterError);
    CHECK_THROWS_AS(parse_colormap("viridis:3:1"), ParameterError);
    CHECK_THROWS_AS(parse_colormap("viridis:1"), ParameterError);
    CHECK_THROWS_AS(parse_color("12345"), ParameterError);
    CHECK_THROWS_AS(parse_color("purple"), ParameterError);
  }

  TEST_CASE("explicit range clips") {
    ColorMap c = parse_colormap("viridis:0:1");
    const FloatGrid g(3, 1, {-5.0, 0.5, 9.0});
    const Image img = heatmap_image(g, c);
    CHECK(img.pixels[0] == c.map(0.0));
    CHECK(img.pixels[2] == c.map(1.0));
  }

  TEST_CASE("labels use the palette and black for -1") {
    const LabelMap l(3, 1, {0, -1, 2});
    const Image img = labels_image(l, default_palette());
    CHECK(img.pixels[0] == default_palette()[0]);
    CHECK(img.pixels[1] == Rgb{0, 0, 0});
    CHECK_THROWS_AS(labels_image(LabelMap(1, 1, {5}), {Rgb{1, 2, 3}}), ParameterError);
  }

  TEST_CASE("composite adds and clips") {
    const FloatGrid a(2, 1, {0.0, 1.0}), b(2, 1, {1.0, 0.0});
    const Image img = composite_image({a, b, a}, {Rgb{200, 0, 0}, Rgb{0, 0, 255}, Rgb{100, 10, 0}});
    CHECK(img.pixels[0] == Rgb{0, 0, 255});
    CHECK(img.pixels[1] == Rgb{255, 10, 0});
    CHECK_THROWS_AS(composite_image({a}, {}), ParameterError);
  }

  TEST_CASE("ppm round trip") {
    testutil::TempDir tmp("render");
    const Image img = heatmap_image(ramp_grid(), ColorMap::viridis());
    write_ppm(img, tmp / "a.ppm");
    const Image back = read_ppm(tmp / "a.ppm");
    CHECK(back.width == 6);
    CHECK(back.height == 4);
    CHECK(back.pixels == img.pixels);
  }

  TEST_CASE("golden images") {
    testutil::TempDir tmp("render");
    render_heatmap(ramp_grid(), ColorMap::viridis(), tmp / "heatmap.ppm");
    render_heatmap(ramp_grid(), parse_colormap("bicolor:black:cyan"), tmp / "bicolor.ppm");
    render_labels_rgb(LabelMap(4, 2, {0, 1, 2, 3, -1, 4, 5, 6}), default_palette(), tmp / "labels.ppm");
    FloatGrid other = ramp_grid();
    std::reverse(other.values.begin(), other.values.end());
    render_composite({ramp_grid(), other}, {parse_color("red"), parse_color("cyan")}, tmp / "composite.ppm");
    for (const char* name : {"heatmap.ppm", "bicolor.ppm", "labels.ppm", "composite.ppm"}) {
      INFO(name);
      CHECK(slurp(tmp / name) == slurp(kGolden / name));
    }
  }
}
