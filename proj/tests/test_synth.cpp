#include <doctest.h>

#include <fstream>

#include "brim/error.hpp"
#include "brim/synth.hpp"
#include "util.hpp"

using namespace brim;

TEST_SUITE("synth") {
  TEST_CASE("phantom abundances lie on the simplex") {
    const auto res = synthesize(PhantomSpec::phantom());
    const Matrix& a = res.truth.abundances;
    REQUIRE(a.rows() == 900);
    REQUIRE(a.cols() == 2);
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      CHECK(a.row(i).minCoeff() >= 0.0);
      CHECK(a.row(i).sum() == doctest::Approx(1.0));
      Eigen::Index arg = 0;
      a.row(i).maxCoeff(&arg);
      CHECK(res.truth.regions.labels[static_cast<std::size_t>(i)] == arg);
    }
    CHECK(a(res.cube.index(14, 14), 1) == 1.0);
    CHECK(a(res.cube.index(0, 0), 0) == 1.0);
  }

  TEST_CASE("pure pixels equal the endmember peak model") {
    PhantomSpec spec = PhantomSpec::phantom();
    const auto res = synthesize(spec);
    for (auto [x, y, k] : {std::tuple{14, 14, 1}, std::tuple{0, 0, 0}}) {
      const auto model = lorentzian_eval(endmember_peaks(spec, k), res.cube.axis());
      const auto row = res.truth.clean.row(static_cast<Eigen::Index>(res.cube.index(x, y)));
      for (std::size_t c = 0; c < model.size(); ++c) CHECK(row[c] == doctest::Approx(model[c]).epsilon(1e-12));
    }
  }

  TEST_CASE("cell preset") {
    const auto res = synthesize(PhantomSpec::cell());
    CHECK(res.cube.nx() == 45);
    CHECK(res.cube.ny() == 50);
    std::vector<int> count(3, 0);
    for (int l : res.truth.regions.labels) count[static_cast<std::size_t>(l)]++;
    for (int c : count) CHECK(c > 20);
    for (Eigen::Index i = 0; i < res.truth.abundances.rows(); ++i)
      CHECK(res.truth.abundances.row(i).sum() == doctest::Approx(1.0));
  }

  TEST_CASE("seeded output is reproducible") {
    PhantomSpec spec = PhantomSpec::cell();
    spec.seed = 17;
    spec.stray_probability = 0.02;
    spec.drift_rate = 0.01;
    const auto a = synthesize(spec), b = synthesize(spec);
    CHECK(a.cube == b.cube);
    CHECK(a.truth.stray == b.truth.stray);
    spec.seed = 18;
    CHECK(!(synthesize(spec).cube == a.cube));
  }

  TEST_CASE("noise level follows sigma times the peak amplitude") {
    PhantomSpec spec = PhantomSpec::phantom();
    spec.noise_sigma = 0.05;
    const auto res = synthesize(spec);
    const Matrix diff = res.cube.data() - res.truth.clean;
    const double sd = std::sqrt(diff.squaredNorm() / static_cast<double>(diff.size()));
    CHECK(sd == doctest::Approx(5.0).epsilon(0.05));
  }

  TEST_CASE("stray light saturates") {
    PhantomSpec spec = PhantomSpec::phantom();
    spec.stray_probability = 0.1;
    spec.seed = 3;
    const auto res = synthesize(spec);
    std::size_t n = 0;
    for (std::size_t i = 0; i < res.truth.stray.size(); ++i) {
      if (!res.truth.stray[i]) continue;
      ++n;
      const auto row = res.cube.row(i);
      CHECK(*std::max_element(row.begin(), row.end()) <= spec.saturation);
      CHECK(row.front() == spec.saturation);
    }
    CHECK(n > 40);
    CHECK(n < 140);
  }

  TEST_CASE("add_noise") {
    const auto cube = synthesize(PhantomSpec::phantom()).cube;
    CHECK(add_noise(cube, 0.0, 1) == cube);
    const auto noisy = add_noise(cube, 0.1, 1);
    CHECK(noisy.data().minCoeff() >= 0.0);
    CHECK(add_noise(cube, 0.1, 1) == noisy);
    CHECK_THROWS_AS(add_noise(cube, -1, 1), ParameterError);
  }

  TEST_CASE("spec validation and parsing") {
    PhantomSpec spec = PhantomSpec::phantom();
    spec.radius = 20;
    CHECK_THROWS_AS(synthesize(spec), ParameterError);
    CHECK_THROWS_AS(spec.set("bogus", "1"), ParameterError);
    CHECK_THROWS_AS(spec.set("nx", "abc"), ParameterError);

    testutil::TempDir tmp("synth");
    {
      std::ofstream out(tmp / "s.txt");
      out << "# demo\npreset = cell\nseed = 9\nendmember.1 = gel:6.5:1.1:80\n";
    }
    const PhantomSpec p = load_phantom_spec(tmp / "s.txt");
    CHECK(p.geometry == PhantomSpec::Geometry::Cell);
    CHECK(p.seed == 9);
    CHECK(p.endmembers.at(1).name == "gel");
    CHECK(p.endmembers.at(1).amplitude == 80.0);
    {
      std::ofstream out(tmp / "bad.txt");
      out << "seed = 1\nno equals here\n";
    }
    try {
      load_phantom_spec(tmp / "bad.txt");
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.line() == 2);
    }
  }

  TEST_CASE("bright-field image") {
    const PhantomSpec spec = PhantomSpec::cell();
    const FloatGrid bf = synth_brightfield(spec, 4, {1.0, 0.7, 0.4}, 0.0, 1);
    CHECK(bf.nx == 180);
    CHECK(bf.ny == 200);
    CHECK(bf.at(0, 0) == doctest::Approx(1.0));
  }
}
