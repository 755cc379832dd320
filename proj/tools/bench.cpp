#include "bench.hpp"

#include <algorithm>
#include <chrono>
#include <functional>
#include <map>

#include "brim/cluster.hpp"
#include "brim/decompose.hpp"
#include "brim/error.hpp"
#include "brim/fitting.hpp"
#include "brim/parallel.hpp"
#include "brim/synth.hpp"

namespace brim::cli {

namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

}  // namespace

Json run_bench(const BenchConfig& cfg) {
  if (cfg.runs < 1) throw ParameterError("bench: runs must be >= 1");
  PhantomSpec spec;
  spec.set("preset", cfg.preset);
  spec.seed = cfg.seed;
  const HyperCube cube = synthesize(spec).cube;
  const Matrix& x = cube.data();
  const ShiftConvention conv = ShiftConvention::fsr_edges(spec.fsr);

  const std::vector<std::pair<std::string, std::function<void()>>> methods{
      {"fit", [&] { fit_cube(cube, {}, conv); }},
      {"pca", [&] { pca(x, cfg.p); }},
      {"vca", [&] { vca(x, cfg.p, cfg.seed); }},
      {"hca", [&] { hca_ward(pairwise_distances(x, DistanceMetric::minkowski(2.0)), cfg.clusters); }},
      {"kmeans", [&] { kmeans(x, cfg.k, 2.0, cfg.seed); }},
  };

  Json report;
  report["schema"] = "brim-bench/1";
  report["preset"] = cfg.preset;
  report["pixels"] = cube.pixels();
  report["channels"] = cube.channels();
  report["seed"] = cfg.seed;
  report["runs"] = cfg.runs;
  report["threads"] = thread_count();
  report["parameters"] = {{"p", cfg.p}, {"clusters", cfg.clusters}, {"k", cfg.k}};
  Json timings = Json::object();
  std::map<std::string, double> medians;
  for (const auto& [name, fn] : methods) {
    std::vector<double> runs;
    for (int r = 0; r < cfg.runs; ++r) {
      const auto t0 = std::chrono::steady_clock::now();
      fn();
      runs.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }
    medians[name] = median(runs);
    timings[name] = {{"runs_s", runs}, {"median_s", medians[name]}};
  }
  report["methods"] = timings;
  Json speedup = Json::object();
  for (const auto& [name, fn] : methods)
    if (name != "fit") speedup[name] = medians["fit"] / std::max(medians[name], 1e-12);
  report["speedup_vs_fit"] = speedup;
  return report;
}

}  // namespace brim::cli
