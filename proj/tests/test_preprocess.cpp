#include <doctest.h>

#include <cmath>
#include <numeric>

#include "brim/error.hpp"
#include "brim/fitting.hpp"
#include "brim/preprocess.hpp"
#include "brim/synth.hpp"
#include "util.hpp"

using namespace brim;

namespace {

double lorentz(double v, double c, double w, double a) {
  const double h = w / 2;
  return a * h * h / ((v - c) * (v - c) + h * h);
}

double window_sum(const std::vector<double>& y, const FreqAxis& ax, double lo, double hi) {
  double s = 0;
  for (std::size_t i = 0; i < y.size(); ++i)
    if (ax[i] >= lo && ax[i] <= hi) s += y[i];
  return s;
}

}  // namespace

TEST_SUITE("preprocess") {
  TEST_CASE("smoothing reproduces polynomials up to its order, edges included") {
    std::vector<double> y(60);
    for (std::size_t i = 0; i < y.size(); ++i) {
      const double t = 0.1 * static_cast<double>(i);
      y[i] = 2.0 - 0.5 * t + 0.3 * t * t;
    }
    for (int window : {5, 7, 11}) {
      const auto s = smooth(y, window, 2);
      for (std::size_t i = 0; i < y.size(); ++i) CHECK(s[i] == doctest::Approx(y[i]).epsilon(1e-10));
    }
    CHECK_THROWS_AS(smooth(y, 4, 2), ParameterError);
    CHECK_THROWS_AS(smooth(y, 5, 5), ParameterError);
  }

  TEST_CASE("smoothing reduces white noise") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<double> y(400);
    for (double& v : y) v = g(rng);
    const auto s = smooth(y, 11, 2);
    const double var_in = std::inner_product(y.begin(), y.end(), y.begin(), 0.0);
    const double var_out = std::inner_product(s.begin(), s.end(), s.begin(), 0.0);
    CHECK(var_out < 0.5 * var_in);
  }

  TEST_CASE("snv gives zero mean and unit sample sd") {
    std::vector<double> y{3, 1, 4, 1, 5, 9, 2, 6, 5, 3};
    const auto z = snv_normalize(y);
    const double mean = std::accumulate(z.begin(), z.end(), 0.0) / z.size();
    double ss = 0;
    for (double v : z) ss += (v - mean) * (v - mean);
    CHECK(std::abs(mean) < 1e-12);
    CHECK(std::sqrt(ss / (z.size() - 1)) == doctest::Approx(1.0));
    CHECK_THROWS_AS(snv_normalize(std::vector<double>(5, 2.0)), DegenerateInputError);
  }

  TEST_CASE("baseline removal keeps peak areas") {
    const auto ax = FreqAxis::linspace(0.0, 30.0, 200);
    std::vector<double> clean(ax.size()), raw(ax.size());
    for (std::size_t i = 0; i < ax.size(); ++i) {
      const double v = ax[i];
      clean[i] = lorentz(v, 7.2, 1.3, 100) + lorentz(v, 22.8, 1.3, 100);
      raw[i] = clean[i] + 20.0 + 0.8 * v - 0.02 * v * v;
    }
    BaselineConfig cfg = BaselineConfig::with_rayleigh_mask(ax, 30.0);
    cfg.poly_order = 3;
    const auto fit = fit_baseline(raw, ax, cfg);
    CHECK(fit.iterations >= 1);
    for (double c : {7.2, 22.8}) {
      const double want = window_sum(clean, ax, c - 3, c + 3);
      const double got = window_sum(fit.corrected, ax, c - 3, c + 3);
      CHECK(got == doctest::Approx(want).epsilon(0.05));
    }
    for (std::size_t i = 0; i < ax.size(); ++i)
      if (ax[i] < 1.5 || ax[i] > 28.5) CHECK(fit.corrected[i] == 0.0);
  }

  TEST_CASE("preprocess_cube records excluded windows") {
    const auto ax = FreqAxis::linspace(0.0, 30.0, 200);
    Matrix data(2, 200);
    for (int k = 0; k < 200; ++k) data(0, k) = data(1, k) = lorentz(ax[k], 7.2, 1.3, 100) + 10.0;
    const HyperCube cube(2, 1, ax, data);
    PreprocessOptions opts;
    CHECK(preprocess_cube(cube, opts).meta().count(kExcludedWindowsKey) == 0);
    opts.baseline = BaselineConfig::with_rayleigh_mask(ax, 30.0);
    CHECK(preprocess_cube(cube, opts).meta().at(kExcludedWindowsKey) == "0:1.5;28.5:30");
  }

  TEST_CASE("baseline rejects underdetermined fits") {
    const auto ax = FreqAxis::linspace(0.0, 30.0, 10);
    BaselineConfig cfg;
    cfg.poly_order = 12;
    CHECK_THROWS_AS(subtract_baseline(std::vector<double>(10, 1.0), ax, cfg), ParameterError);
  }

  TEST_CASE("shift_spectrum translates a peak") {
    const auto ax = FreqAxis::linspace(0.0, 30.0, 301);
    std::vector<double> y(ax.size());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = lorentz(ax[i], 10.0, 1.0, 1.0);
    const auto s = shift_spectrum(y, ax, 0.4);
    CHECK(peak_centroid(s, ax, {7, 13.4}) - peak_centroid(y, ax, {6.6, 13}) == doctest::Approx(0.4).epsilon(1e-3));
  }

  TEST_CASE("split_strips bands") {
    PhantomSpec spec = PhantomSpec::phantom();
    spec.noise_sigma = 0;
    const auto cube = synthesize(spec).cube;
    const auto strips = split_strips(cube, 4);
    REQUIRE(strips.size() == 4);
    std::size_t rows = 0;
    for (std::size_t s = 0; s < 4; ++s) {
      CHECK(strips[s].ny() == (s + 1) * 30 / 4 - s * 30 / 4);
      rows += strips[s].ny();
    }
    CHECK(rows == 30);
    CHECK_THROWS_AS(split_strips(cube, 31), ParameterError);
    CHECK_THROWS_AS(split_strips(cube, 0), ParameterError);
  }

  TEST_CASE("stitching undoes stripe drift") {
    PhantomSpec spec = PhantomSpec::phantom();
    spec.noise_sigma = 0;
    spec.stripes = 3;
    spec.stripe_drift = 0.3;
    const auto res = synthesize(spec);
    PhantomSpec flat = spec;
    flat.stripe_drift = 0;
    const auto ref = synthesize(flat);

    const auto strips = split_strips(res.cube, 3);
    std::vector<std::vector<bool>> masks;
    std::size_t off = 0;
    for (const auto& s : strips) {
      std::vector<bool> m(s.pixels());
      for (std::size_t i = 0; i < s.pixels(); ++i) m[i] = res.truth.regions.labels[off + i] == 0;
      off += s.pixels();
      masks.push_back(m);
    }
    const auto st = correct_drift_stitch(strips, {5.0, 9.5}, masks);
    REQUIRE(st.offsets.size() == 3);
    CHECK(st.offsets[0] == 0.0);
    CHECK(st.offsets[1] == doctest::Approx(-0.3).epsilon(0.05));
    CHECK(st.offsets[2] == doctest::Approx(-0.6).epsilon(0.05));
    CHECK(st.cube.ny() == 30);
    const double err = (st.cube.data() - ref.cube.data()).cwiseAbs().maxCoeff();
    CHECK(err < 0.05 * ref.cube.data().maxCoeff());
  }

  TEST_CASE("stitching fails loudly without a reference peak") {
    Matrix flat = Matrix::Constant(4, 50, 1.0);
    const HyperCube c(2, 2, FreqAxis::linspace(0, 30, 50), flat);
    CHECK_THROWS_AS(correct_drift_stitch(split_strips(c, 2), {5.0, 9.5}), DegenerateInputError);
  }
}
