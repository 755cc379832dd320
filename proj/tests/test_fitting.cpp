#include <doctest.h>

#include <cmath>

#include "brim/error.hpp"
#include "brim/fitting.hpp"
#include "util.hpp"

using namespace brim;

namespace {

std::vector<double> pair_spectrum(const FreqAxis& ax, double shift, double width, double amp, double offset = 5.0) {
  const std::vector<LorentzianPeak> peaks{{amp, shift, width, offset}, {amp, 30.0 - shift, width, 0.0}};
  return lorentzian_eval(peaks, ax);
}

}  // namespace

TEST_SUITE("fitting") {
  TEST_CASE("lorentzian_eval matches the closed form") {
    const auto ax = FreqAxis::linspace(0, 10, 11);
    const LorentzianPeak p{4.0, 5.0, 2.0, 1.0};
    const auto y = lorentzian_eval(std::span<const LorentzianPeak>(&p, 1), ax);
    CHECK(y[5] == doctest::Approx(5.0));
    CHECK(y[6] == doctest::Approx(1.0 + 4.0 * 1.0 / 2.0));
  }

  TEST_CASE("r_squared") {
    const std::vector<double> y{1, 2, 3, 4};
    CHECK(r_squared(y, y) == 1.0);
    CHECK(r_squared(y, std::vector<double>(4, 2.5)) == doctest::Approx(0.0));
    CHECK_THROWS_AS(r_squared(std::vector<double>(4, 1.0), y), DegenerateInputError);
  }

  TEST_CASE("shift conventions") {
    const auto fsr = ShiftConvention::fsr_edges(30.0);
    CHECK(fsr.shift_of(7.0) == doctest::Approx(7.0));
    CHECK(fsr.shift_of(23.0) == doctest::Approx(7.0));
    const auto mid = ShiftConvention::centered(0.0);
    CHECK(mid.shift_of(-5.0) == doctest::Approx(5.0));
    CHECK(mid.shift_of(5.0) == doctest::Approx(5.0));
  }

  TEST_CASE("noiseless pair is recovered exactly") {
    const auto ax = FreqAxis::linspace(0, 30, 200);
    for (double shift : {5.5, 7.194, 13.3}) {
      const auto y = pair_spectrum(ax, shift, 1.1, 80.0);
      const auto fit = fit_brillouin_spectrum(y, ax, {}, ShiftConvention::fsr_edges(30.0));
      CHECK(fit.estimate.converged);
      CHECK(fit.estimate.shift == doctest::Approx(shift).epsilon(1e-6));
      CHECK(fit.estimate.width == doctest::Approx(1.1).epsilon(1e-6));
      CHECK(fit.estimate.r2 > 0.999999);
    }
  }

  TEST_CASE("default_init finds the two largest maxima") {
    const auto ax = FreqAxis::linspace(0, 30, 200);
    const auto y = pair_spectrum(ax, 8.0, 1.0, 50.0);
    const auto init = default_init(y, ax, 2);
    REQUIRE(init.size() == 2);
    std::vector<double> c{init[0].center, init[1].center};
    std::sort(c.begin(), c.end());
    CHECK(std::abs(c[0] - 8.0) < 0.2);
    CHECK(std::abs(c[1] - 22.0) < 0.2);
    CHECK_THROWS_AS(default_init(std::vector<double>(200, 1.0), ax, 2), DegenerateInputError);
  }

  TEST_CASE("fit_cube replaces poor fits from recent accepted pixels") {
    const auto ax = FreqAxis::linspace(0, 30, 200);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Matrix data(4, 200);
    const double shifts[] = {7.0, 7.4, 0.0, 7.2};
    for (int i = 0; i < 4; ++i) {
      if (i == 2) {
        for (int k = 0; k < 200; ++k) data(i, k) = u(rng);
      } else {
        const auto y = pair_spectrum(ax, shifts[i], 1.2, 60.0);
        for (int k = 0; k < 200; ++k) data(i, k) = y[k];
      }
    }
    const HyperCube cube(4, 1, ax, data);
    const FitMaps maps = fit_cube(cube, {}, ShiftConvention::fsr_edges(30.0));
    CHECK(maps.replaced == std::vector<bool>{false, false, true, false});
    CHECK(maps.shift.values[2] == doctest::Approx(7.2).epsilon(1e-6));
    CHECK(maps.width.values[2] == doctest::Approx(1.2).epsilon(1e-6));
    CHECK(maps.shift.values[3] == doctest::Approx(7.2).epsilon(1e-6));
  }

  TEST_CASE("fit_cube skips channels in excluded windows") {
    const auto ax = FreqAxis::linspace(0, 30, 200);
    auto y = pair_spectrum(ax, 7.0, 1.2, 60.0, 12.0);
    for (std::size_t k = 0; k < 200; ++k)
      if (ax[k] <= 1.5 || ax[k] >= 28.5) y[k] = 0.0;
    Matrix data(1, 200);
    for (int k = 0; k < 200; ++k) data(0, k) = y[k];
    const HyperCube plain(1, 1, ax, data);
    const HyperCube masked(1, 1, ax, data, {{kExcludedWindowsKey, "0:1.5;28.5:30"}});
    const auto conv = ShiftConvention::fsr_edges(30.0);
    const FitMaps a = fit_cube(plain, {}, conv, 0.999);
    const FitMaps b = fit_cube(masked, {}, conv, 0.999);
    CHECK(a.r2.values[0] < 0.999);
    CHECK(b.r2.values[0] > 0.999999);
    CHECK(b.shift.values[0] == doctest::Approx(7.0).epsilon(1e-6));
    const HyperCube bad(1, 1, ax, data, {{kExcludedWindowsKey, "0-1.5"}});
    CHECK_THROWS_AS(fit_cube(bad, {}, conv), ParameterError);
  }

  TEST_CASE("fit_cube fallback when no pixel is accepted") {
    const auto ax = FreqAxis::linspace(0, 30, 200);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Matrix data(3, 200);
    const auto y0 = pair_spectrum(ax, 7.0, 1.2, 60.0);
    const auto y2 = pair_spectrum(ax, 8.0, 1.4, 60.0);
    for (int k = 0; k < 200; ++k) {
      data(0, k) = y0[k];
      data(1, k) = u(rng);
      data(2, k) = y2[k];
    }
    const HyperCube cube(3, 1, ax, data);
    // r2_accept above 1 rejects everything; the two clean pixels still pass r2_replace.
    const FitMaps maps = fit_cube(cube, {}, ShiftConvention::fsr_edges(30.0), 1.5, 0.8);
    CHECK(maps.replaced == std::vector<bool>{false, true, false});
    CHECK(maps.shift.values[1] == doctest::Approx(7.5).epsilon(1e-6));
    CHECK(maps.width.values[1] == doctest::Approx(1.3).epsilon(1e-6));
  }

  TEST_CASE("bootstrap argument checks") {
    const auto ax = FreqAxis::linspace(0, 30, 200);
    const auto y = pair_spectrum(ax, 7.0, 1.2, 60.0);
    CHECK_THROWS_AS(bootstrap_errors(y, ax, {}, 50, 1, ShiftConvention::fsr_edges(30.0)), ParameterError);
  }

  TEST_CASE("bootstrap is seeded") {
    const auto ax = FreqAxis::linspace(0, 30, 200);
    auto y = pair_spectrum(ax, 7.0, 1.2, 60.0);
    std::mt19937_64 rng(9);
    std::normal_distribution<double> g(0, 3.0);
    for (double& v : y) v += g(rng);
    const auto a = bootstrap_errors(y, ax, {}, 100, 42, ShiftConvention::fsr_edges(30.0));
    const auto b = bootstrap_errors(y, ax, {}, 100, 42, ShiftConvention::fsr_edges(30.0));
    CHECK(a.shift_err == b.shift_err);
    CHECK(a.shift_err > 0);
  }
}
