#include "cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>

#include "bench.hpp"
#include "brim/classify.hpp"
#include "brim/cluster.hpp"
#include "brim/decompose.hpp"
#include "brim/error.hpp"
#include "brim/fitting.hpp"
#include "brim/parallel.hpp"
#include "brim/preprocess.hpp"
#include "brim/render.hpp"
#include "brim/serialize.hpp"
#include "brim/synth.hpp"
#include "manifest.hpp"

namespace fs = std::filesystem;

namespace brim::cli {

namespace {

struct Globals {
  std::uint64_t seed = 0;
  unsigned threads = 1;
  std::string manifest;
};

fs::path sibling(const fs::path& p, const std::string& suffix) { return p.parent_path() / (p.stem().string() + suffix); }

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

void ensure_parent(const fs::path& file) {
  if (file.has_parent_path()) ensure_dir(file.parent_path());
}

FreqWindow parse_window(const std::string& s) {
  const auto colon = s.find(':');
  if (colon == std::string::npos) throw ParameterError("window '" + s + "' must look like lo:hi");
  try {
    const FreqWindow w{std::stod(s.substr(0, colon)), std::stod(s.substr(colon + 1))};
    if (!(w.lo < w.hi)) throw ParameterError("window '" + s + "' needs lo < hi");
    return w;
  } catch (const std::logic_error&) {
    throw ParameterError("window '" + s + "' must look like lo:hi");
  }
}

AbundanceMode parse_mode(const std::string& s) {
  if (s == "full") return AbundanceMode::Full;
  if (s == "nonneg") return AbundanceMode::Nonneg;
  return AbundanceMode::Unconstrained;
}

ShiftConvention parse_convention(const std::string& layout, double fsr, double midpoint) {
  return layout == "centered" ? ShiftConvention::centered(midpoint) : ShiftConvention::fsr_edges(fsr);
}

struct MetricOptions {
  std::string name = "minkowski";
  double order = 2.0;
  std::optional<double> ridge;

  void add(CLI::App* sub) {
    sub->add_option("--metric", name, "Distance: minkowski, correlation or mahalanobis")
        ->check(CLI::IsMember({"minkowski", "correlation", "mahalanobis"}))
        ->capture_default_str();
    sub->add_option("--order", order, "Minkowski order R")->check(CLI::Range(1.0, 1e6))->capture_default_str();
    sub->add_option("--ridge", ridge, "Mahalanobis ridge (default 1e-3 trace(C)/f)")->check(CLI::NonNegativeNumber);
  }

  DistanceMetric build(const Matrix& x) const {
    if (name == "correlation") return DistanceMetric::correlation();
    if (name == "mahalanobis") {
      DistanceMetric m = DistanceMetric::mahalanobis_pooled(x);
      if (ridge) m.ridge = *ridge;
      return m;
    }
    return DistanceMetric::minkowski(order);
  }
};

// Records every option of a subcommand, defaults included, in the manifest.
void record_params(const CLI::App* sub, RunManifest& manifest) {
  for (const CLI::Option* opt : sub->get_options()) {
    const std::string name = opt->get_name(false, true);
    if (name.empty() || opt->get_single_name() == "help") continue;
    std::string key = opt->get_single_name();
    if (opt->count() > 0) {
      const auto& res = opt->results();
      if (res.size() == 1)
        manifest.set_param(key, res[0]);
      else
        manifest.set_param(key, res);
    } else {
      manifest.set_param(key, opt->get_default_str());
    }
  }
}

Matrix scores_with_snv_strips(const Matrix& scores, std::size_t nx, std::size_t ny, std::size_t strips) {
  Matrix out = scores;
  for (std::size_t s = 0; s < strips; ++s) {
    const std::size_t y0 = s * ny / strips, y1 = (s + 1) * ny / strips;
    const auto rows = static_cast<Eigen::Index>((y1 - y0) * nx);
    if (rows < 2) continue;
    for (Eigen::Index c = 0; c < out.cols(); ++c) {
      auto col = out.block(static_cast<Eigen::Index>(y0 * nx), c, rows, 1);
      const double mean = col.mean();
      const double sd = std::sqrt((col.array() - mean).square().sum() / static_cast<double>(rows - 1));
      col.array() -= mean;
      if (sd > 0) col /= sd;
    }
  }
  return out;
}

Json decomposition_json(const Decomposition& dec, const HyperCube& cube) {
  Json j = to_json(dec);
  j["grid"] = {{"nx", cube.nx()}, {"ny", cube.ny()}};
  j["axis"] = cube.axis().values();
  return j;
}

std::pair<std::size_t, std::size_t> grid_of(const Json& j, const Decomposition& dec) {
  if (j.contains("grid")) return {j["grid"].at("nx").get<std::size_t>(), j["grid"].at("ny").get<std::size_t>()};
  return {static_cast<std::size_t>(dec.scores.rows()), 1};
}

// Rows of the image half used by the holdout protocol: bottom = larger y.
std::vector<bool> half_mask(const std::string& half, std::size_t nx, std::size_t ny) {
  std::vector<bool> m(nx * ny, true);
  if (half == "all") return m;
  for (std::size_t y = 0; y < ny; ++y) {
    const bool bottom = y >= ny / 2;
    for (std::size_t x = 0; x < nx; ++x) m[y * nx + x] = half == "bottom" ? bottom : !bottom;
  }
  return m;
}

Matrix select_columns(const Matrix& scores, const std::vector<int>& cols) {
  Matrix out(scores.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k) {
    if (cols[k] < 0 || cols[k] >= scores.cols())
      throw ParameterError("component index " + std::to_string(cols[k]) + " out of range [0, " +
                           std::to_string(scores.cols() - 1) + "]");
    out.col(static_cast<Eigen::Index>(k)) = scores.col(cols[k]);
  }
  return out;
}

std::vector<Rgb> parse_palette(const std::string& s) {
  if (s == "default") return default_palette();
  std::vector<Rgb> out;
  std::stringstream ss(s);
  for (std::string c; std::getline(ss, c, ',');) out.push_back(parse_color(c));
  return out;
}

ClusterResult maybe_merge(const HyperCube& cube, ClusterResult res, std::optional<int> merge_to) {
  if (merge_to) return merge_by_mean_spectra(cube, res, *merge_to);
  res.mean_spectra = cluster_means(cube.data(), res.labels, res.clusters);
  return res;
}

void write_cluster_outputs(const HyperCube& cube, const ClusterResult& res, const DistanceMetric& metric,
                           const fs::path& out, const Json& params, std::uint64_t seed, RunManifest& manifest) {
  ensure_parent(out);
  save_labels(LabelMap(cube.nx(), cube.ny(), res.labels), out);
  const fs::path side = fs::path(out.string() + ".json");
  write_json(cluster_sidecar(res, metric, params, seed), side);
  manifest.add_output(out);
  manifest.add_output(side);
}

}  // namespace

int parse_and_run(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  return parse_and_run(static_cast<int>(argv.size()), argv.data());
}

int parse_and_run(int argc, const char* const* argv) {
  CLI::App app{"brim: multivariate analysis of Brillouin hyperspectral images"};
  app.require_subcommand(1);
  app.set_config("--config", "", "key=value config file; command-line flags take precedence");
  Globals g;
  app.add_option("--seed", g.seed, "Random seed recorded in every manifest")->capture_default_str();
  app.add_option("--threads", g.threads, "Worker threads, 0 = all cores")->capture_default_str();
  app.add_option("--manifest", g.manifest, "Run manifest path (default derived from the output)");

  std::vector<std::string> raw(argv, argv + argc);
  std::function<void(RunManifest&)> action;
  std::string command;
  fs::path manifest_default;

  // ---- synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic phantom or cell cube with ground truth");
  struct {
    std::string preset = "phantom", spec_file, out;
    std::optional<double> noise, drift_rate, stripe_drift, stray, interface_px;
    std::optional<int> stripes, droplets;
    bool brightfield = false;
    std::size_t bf_factor = 10;
    double bf_noise = 0.02;
  } so;
  synth->add_option("--preset", so.preset, "phantom or cell")
      ->check(CLI::IsMember({"phantom", "cell"}))
      ->capture_default_str();
  synth->add_option("--spec", so.spec_file, "key = value phantom spec file")->check(CLI::ExistingFile);
  synth->add_option("-o,--output", so.out, "Output cube (HSC1)")->required();
  synth->add_option("--noise", so.noise, "Noise sigma as a fraction of peak amplitude")->check(CLI::NonNegativeNumber);
  synth->add_option("--drift-rate", so.drift_rate, "Laser drift, GHz per pixel row");
  synth->add_option("--stripes", so.stripes, "Number of acquisition stripes")->check(CLI::PositiveNumber);
  synth->add_option("--stripe-drift", so.stripe_drift, "Drift step between stripes, GHz");
  synth->add_option("--stray", so.stray, "Stray-light event probability per pixel")->check(CLI::Range(0.0, 1.0));
  synth->add_option("--interface", so.interface_px, "Interface mixing band, px")->check(CLI::NonNegativeNumber);
  synth->add_option("--droplets", so.droplets, "Lipid droplet count (cell)")->check(CLI::NonNegativeNumber);
  synth->add_flag("--brightfield", so.brightfield, "Also write a co-registered bright-field image (MAP1)");
  synth->add_option("--bf-factor", so.bf_factor, "Bright-field upsampling factor")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  synth->add_option("--bf-noise", so.bf_noise, "Bright-field noise sigma")->capture_default_str();
  synth->callback([&] {
    command = "synth";
    manifest_default = sibling(so.out, ".manifest.json");
    action = [&](RunManifest& m) {
      PhantomSpec spec = so.spec_file.empty() ? PhantomSpec{} : load_phantom_spec(so.spec_file);
      if (so.spec_file.empty() || synth->count("--preset")) spec.set("preset", so.preset);
      if (!so.spec_file.empty()) m.add_input(so.spec_file);
      if (app.count("--seed") || so.spec_file.empty()) spec.seed = g.seed;
      if (so.noise) spec.noise_sigma = *so.noise;
      if (so.drift_rate) spec.drift_rate = *so.drift_rate;
      if (so.stripes) spec.stripes = *so.stripes;
      if (so.stripe_drift) spec.stripe_drift = *so.stripe_drift;
      if (so.stray) spec.stray_probability = *so.stray;
      if (so.interface_px) spec.interface_px = *so.interface_px;
      if (so.droplets) spec.droplets = *so.droplets;
      m.set_seed(spec.seed);
      const SynthResult res = m.timed([&] { return synthesize(spec); });
      std::optional<FloatGrid> bf;
      if (so.brightfield) {
        const std::vector<double> levels = spec.geometry == PhantomSpec::Geometry::Cell
                                               ? std::vector<double>{1.0, 0.7, 0.4}
                                               : std::vector<double>{1.0, 0.5};
        bf = m.timed([&] { return synth_brightfield(spec, so.bf_factor, levels, so.bf_noise, spec.seed + 1); });
      }
      const fs::path out = so.out;
      ensure_parent(out);
      save_cube(res.cube, out);
      save_labels(res.truth.regions, sibling(out, ".truth.lbl"));
      write_json(truth_to_json(res.truth), sibling(out, ".truth.json"));
      m.add_output(out);
      m.add_output(sibling(out, ".truth.lbl"));
      m.add_output(sibling(out, ".truth.json"));
      if (bf) {
        save_grid(*bf, sibling(out, ".bf.map"));
        m.add_output(sibling(out, ".bf.map"));
      }
    };
  });

  // ---- preprocess
  auto* prep = app.add_subcommand("preprocess", "Drift stitching, baseline removal, smoothing and SNV");
  struct {
    std::string in, out, ref_window = "5:9.5", ref_labels;
    bool no_baseline = false, snv = false;
    int order = 5, smooth_window = 0, smooth_order = 2, ref_label = 0;
    double rayleigh = 1.5, fsr = 30.0;
    std::size_t strips = 1;
  } po;
  prep->add_option("input", po.in, "Input cube")->required()->check(CLI::ExistingFile);
  prep->add_option("-o,--output", po.out, "Output cube")->required();
  prep->add_flag("--no-baseline", po.no_baseline, "Skip baseline subtraction");
  prep->add_option("--baseline-order", po.order, "Baseline polynomial order")
      ->check(CLI::Range(0, 15))
      ->capture_default_str();
  prep->add_option("--rayleigh-half-width", po.rayleigh, "Mask +- this many GHz around 0 and fsr (0 = no mask)")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  prep->add_option("--fsr", po.fsr, "Free spectral range, GHz")->check(CLI::PositiveNumber)->capture_default_str();
  prep->add_option("--smooth-window", po.smooth_window, "Local polynomial smoothing window, odd (0 = off)")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  prep->add_option("--smooth-order", po.smooth_order, "Smoothing polynomial order")->capture_default_str();
  prep->add_flag("--snv", po.snv, "Standard normal variate per spectrum");
  prep->add_option("--strips", po.strips, "Split rows into this many strips and correct drift")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  prep->add_option("--ref-window", po.ref_window, "Reference peak window lo:hi, GHz")->capture_default_str();
  prep->add_option("--ref-labels", po.ref_labels, "Label map selecting reference-medium pixels")
      ->check(CLI::ExistingFile);
  prep->add_option("--ref-label", po.ref_label, "Label value of the reference medium")->capture_default_str();
  prep->callback([&] {
    command = "preprocess";
    manifest_default = sibling(po.out, ".manifest.json");
    action = [&](RunManifest& m) {
      HyperCube cube = load_cube(po.in);
      m.add_input(po.in);
      std::optional<LabelMap> ref;
      if (!po.ref_labels.empty()) {
        ref = load_labels(po.ref_labels);
        m.add_input(po.ref_labels);
        if (ref->nx != cube.nx() || ref->ny != cube.ny())
          throw ParameterError("--ref-labels grid does not match the cube");
      }
      const FreqWindow window = parse_window(po.ref_window);
      PreprocessOptions opts;
      if (!po.no_baseline) {
        opts.baseline = po.rayleigh > 0 ? BaselineConfig::with_rayleigh_mask(cube.axis(), po.fsr, po.rayleigh)
                                        : BaselineConfig{};
        opts.baseline->poly_order = po.order;
      }
      if (po.smooth_window > 0) opts.smoothing = std::make_pair(po.smooth_window, po.smooth_order);
      opts.snv = po.snv;
      HyperCube out = m.timed([&] {
        HyperCube c = cube;
        if (po.strips > 1) {
          const auto strips = split_strips(c, po.strips);
          std::vector<std::vector<bool>> masks;
          if (ref) {
            std::size_t offset = 0;
            for (const auto& s : strips) {
              std::vector<bool> mk(s.pixels());
              for (std::size_t i = 0; i < s.pixels(); ++i) mk[i] = ref->labels[offset + i] == po.ref_label;
              offset += s.pixels();
              masks.push_back(std::move(mk));
            }
          }
          StitchResult st = correct_drift_stitch(strips, window, masks);
          m.note("drift_offsets_ghz", st.offsets);
          c = std::move(st.cube);
        }
        return preprocess_cube(c, opts);
      });
      ensure_parent(po.out);
      save_cube(out, po.out);
      m.add_output(po.out);
    };
  });

  // ---- fit
  auto* fit = app.add_subcommand("fit", "Per-pixel Lorentzian fitting: shift, width and R^2 maps");
  struct {
    std::string in, out, layout = "fsr";
    double fsr = 30.0, midpoint = 0.0, accept = 0.95, replace = 0.8;
  } fo;
  fit->add_option("input", fo.in, "Input cube")->required()->check(CLI::ExistingFile);
  fit->add_option("-o,--output", fo.out, "Output directory")->required();
  fit->add_option("--layout", fo.layout, "Peak layout: fsr (peaks at v and fsr - v) or centered")
      ->check(CLI::IsMember({"fsr", "centered"}))
      ->capture_default_str();
  fit->add_option("--fsr", fo.fsr, "Free spectral range, GHz")->check(CLI::PositiveNumber)->capture_default_str();
  fit->add_option("--midpoint", fo.midpoint, "Elastic line position for the centered layout")->capture_default_str();
  fit->add_option("--r2-accept", fo.accept, "R^2 for a pixel to serve as a replacement source")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  fit->add_option("--r2-replace", fo.replace, "Pixels below this R^2 are replaced")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  fit->callback([&] {
    command = "fit";
    manifest_default = fs::path(fo.out) / "manifest.json";
    action = [&](RunManifest& m) {
      const HyperCube cube = load_cube(fo.in);
      m.add_input(fo.in);
      const ShiftConvention conv = parse_convention(fo.layout, fo.fsr, fo.midpoint);
      const FitMaps maps = m.timed([&] { return fit_cube(cube, {}, conv, fo.accept, fo.replace); });
      const fs::path dir = fo.out;
      ensure_dir(dir);
      save_grid(maps.shift, dir / "shift.map");
      save_grid(maps.width, dir / "width.map");
      save_grid(maps.r2, dir / "r2.map");
      std::vector<int> rep(maps.replaced.begin(), maps.replaced.end());
      save_labels(LabelMap(cube.nx(), cube.ny(), rep), dir / "replaced.lbl");
      for (const char* f : {"shift.map", "width.map", "r2.map", "replaced.lbl"}) m.add_output(dir / f);
      m.note("replaced_pixels", std::count(rep.begin(), rep.end(), 1));
    };
  });

  // ---- pca / vca
  auto* pca_cmd = app.add_subcommand("pca", "Principal component analysis");
  auto* vca_cmd = app.add_subcommand("vca", "Vertex component analysis with abundance estimation");
  struct {
    std::string in, out, mode = "full";
    int p = 0;
    std::size_t strips = 1;
    bool curve = false, fit_endmembers = true;
    double fsr = 30.0;
  } dco;
  for (auto* sub : {pca_cmd, vca_cmd}) {
    sub->add_option("input", dco.in, "Input cube")->required()->check(CLI::ExistingFile);
    sub->add_option("-o,--output", dco.out, "Decomposition JSON")->required();
  }
  pca_cmd->add_option("--p", dco.p, "Number of components")->required()->check(CLI::Range(1, 1 << 20));
  pca_cmd->add_flag("--explained-curve", dco.curve, "Store the explained-variance fraction of every component");
  vca_cmd->add_option("--p", dco.p, "Number of endmembers")->required()->check(CLI::Range(2, 1 << 20));
  vca_cmd->add_option("--abundance", dco.mode, "Abundance constraint: full, nonneg or unconstrained")
      ->check(CLI::IsMember({"full", "nonneg", "unconstrained"}))
      ->capture_default_str();
  vca_cmd->add_option("--strips", dco.strips, "SNV-normalize abundances within this many row strips")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  vca_cmd->add_option("--fit-endmembers", dco.fit_endmembers, "Fit a Lorentzian pair to every endmember spectrum")
      ->capture_default_str();
  vca_cmd->add_option("--fsr", dco.fsr, "Free spectral range for endmember fits")->capture_default_str();
  pca_cmd->callback([&] {
    command = "pca";
    manifest_default = sibling(dco.out, ".manifest.json");
    action = [&](RunManifest& m) {
      const HyperCube cube = load_cube(dco.in);
      m.add_input(dco.in);
      const Decomposition dec = m.timed([&] { return pca(cube.data(), dco.p); });
      Json j = decomposition_json(dec, cube);
      if (dco.curve) j["explained_curve"] = explained_variance_curve(cube.data());
      ensure_parent(dco.out);
      write_json(j, dco.out);
      m.add_output(dco.out);
    };
  });
  vca_cmd->callback([&] {
    command = "vca";
    manifest_default = sibling(dco.out, ".manifest.json");
    action = [&](RunManifest& m) {
      const HyperCube cube = load_cube(dco.in);
      m.add_input(dco.in);
      Decomposition dec = m.timed([&] { return vca(cube.data(), dco.p, g.seed, parse_mode(dco.mode)); });
      if (dco.strips > 1) {
        if (dco.strips > cube.ny()) throw ParameterError("--strips exceeds the number of rows");
        dec.scores = scores_with_snv_strips(dec.scores, cube.nx(), cube.ny(), dco.strips);
      }
      Json j = decomposition_json(dec, cube);
      if (dco.fit_endmembers) {
        Json fits = Json::array();
        const ShiftConvention conv = ShiftConvention::fsr_edges(dco.fsr);
        for (Eigen::Index k = 0; k < dec.loadings.cols(); ++k) {
          const Vector spec = dec.loadings.col(k);
          const SpectrumFit f = fit_brillouin_spectrum(std::span<const double>(spec.data(), spec.size()), cube.axis(),
                                                       {}, conv);
          fits.push_back({{"shift", f.estimate.shift},
                          {"width", f.estimate.width},
                          {"shift_err", f.estimate.shift_err},
                          {"width_err", f.estimate.width_err},
                          {"r2", f.estimate.r2},
                          {"converged", f.estimate.converged}});
        }
        j["endmember_fits"] = fits;
      }
      ensure_parent(dco.out);
      write_json(j, dco.out);
      m.add_output(dco.out);
    };
  });

  // ---- abundance
  auto* ab = app.add_subcommand("abundance", "Per-component abundance or score maps from a decomposition");
  struct {
    std::string in, dec, out, mode = "full";
  } ao;
  ab->add_option("input", ao.in, "Input cube")->required()->check(CLI::ExistingFile);
  ab->add_option("--decomposition", ao.dec, "Decomposition JSON")->required()->check(CLI::ExistingFile);
  ab->add_option("-o,--output", ao.out, "Output directory")->required();
  ab->add_option("--mode", ao.mode, "Abundance constraint for VCA endmembers: full, nonneg or unconstrained")
      ->check(CLI::IsMember({"full", "nonneg", "unconstrained"}))
      ->capture_default_str();
  ab->callback([&] {
    command = "abundance";
    manifest_default = fs::path(ao.out) / "manifest.json";
    action = [&](RunManifest& m) {
      const HyperCube cube = load_cube(ao.in);
      const Decomposition dec = decomposition_from_json(read_json(ao.dec));
      m.add_input(ao.in);
      m.add_input(ao.dec);
      if (dec.loadings.rows() != static_cast<Eigen::Index>(cube.channels()))
        throw ParameterError("decomposition channel count does not match the cube");
      const Matrix scores = m.timed([&]() -> Matrix {
        if (dec.method == Decomposition::Method::VCA)
          return estimate_abundance(cube.data(), dec.loadings, parse_mode(ao.mode));
        return (cube.data().rowwise() - dec.mean_spectrum.transpose()) * dec.loadings;
      });
      Decomposition view = dec;
      view.scores = scores;
      ensure_dir(ao.out);
      for (std::size_t k = 0; k < view.components(); ++k) {
        const fs::path p = fs::path(ao.out) / ("component_" + std::to_string(k) + ".map");
        save_grid(scores_map(view, k, cube.nx(), cube.ny()), p);
        m.add_output(p);
      }
    };
  });

  // ---- lda-train / lda-predict
  auto* ldat = app.add_subcommand("lda-train", "Train LDA on component scores (holdout protocol)");
  auto* ldap = app.add_subcommand("lda-predict", "Classify component scores with a trained LDA model");
  struct {
    std::string dec, labels, model, out, half_train = "bottom", half_predict = "all";
    std::vector<int> components{0};
    bool threshold = false, weighted = false;
    double k_sigma = 2.0;
    std::optional<double> ridge;
  } lo;
  for (auto* sub : {ldat, ldap}) {
    sub->add_option("decomposition", lo.dec, "Decomposition JSON providing the scores")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--components", lo.components, "Score columns used as features")
        ->delimiter(',')
        ->capture_default_str();
    sub->add_option("-o,--output", lo.out, "Output file")->required();
  }
  ldat->add_option("--labels", lo.labels, "Training label map (-1 = excluded)")->check(CLI::ExistingFile);
  ldat->add_flag("--threshold", lo.threshold, "Label by thresholding the first feature at its mean");
  ldat->add_option("--k-sigma", lo.k_sigma, "Outlier cut for --threshold, in standard deviations")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  ldat->add_option("--half", lo.half_train, "Training rows: bottom, top or all")
      ->check(CLI::IsMember({"bottom", "top", "all"}))
      ->capture_default_str();
  ldat->add_option("--ridge", lo.ridge, "Within-class ridge (default 1e-6 trace(S_I)/f)")
      ->check(CLI::NonNegativeNumber);
  ldat->add_flag("--weighted", lo.weighted, "Weight the between-class scatter by class size");
  ldap->add_option("--model", lo.model, "Model JSON from lda-train")->required()->check(CLI::ExistingFile);
  ldap->add_option("--half", lo.half_predict, "Rows to classify: bottom, top or all (others get -1)")
      ->check(CLI::IsMember({"bottom", "top", "all"}))
      ->capture_default_str();
  ldat->callback([&] {
    command = "lda-train";
    manifest_default = sibling(lo.out, ".manifest.json");
    action = [&](RunManifest& m) {
      const Json dj = read_json(lo.dec);
      const Decomposition dec = decomposition_from_json(dj);
      m.add_input(lo.dec);
      const auto [nx, ny] = grid_of(dj, dec);
      const Matrix feats = select_columns(dec.scores, lo.components);
      if (lo.labels.empty() == !lo.threshold) throw ParameterError("give exactly one of --labels or --threshold");
      std::vector<int> labels;
      if (!lo.labels.empty()) {
        const LabelMap lm = load_labels(lo.labels);
        m.add_input(lo.labels);
        if (lm.labels.size() != static_cast<std::size_t>(feats.rows()))
          throw ParameterError("--labels size does not match the decomposition");
        labels = lm.labels;
      }
      const std::vector<bool> use = half_mask(lo.half_train, nx, ny);
      const LdaModel model = m.timed([&] {
        std::vector<std::size_t> rows;
        for (std::size_t i = 0; i < use.size(); ++i)
          if (use[i]) rows.push_back(i);
        if (lo.threshold) {
          std::vector<double> s;
          for (std::size_t i : rows) s.push_back(feats(static_cast<Eigen::Index>(i), 0));
          const std::vector<int> t = threshold_label(s, lo.k_sigma);
          labels.assign(use.size(), -1);
          for (std::size_t k = 0; k < rows.size(); ++k) labels[rows[k]] = t[k];
        }
        std::vector<std::size_t> keep;
        for (std::size_t i : rows)
          if (labels[i] >= 0) keep.push_back(i);
        Matrix x(static_cast<Eigen::Index>(keep.size()), feats.cols());
        std::vector<int> y;
        for (std::size_t k = 0; k < keep.size(); ++k) {
          x.row(static_cast<Eigen::Index>(k)) = feats.row(static_cast<Eigen::Index>(keep[k]));
          y.push_back(labels[keep[k]]);
        }
        return lda_train(x, y, lo.ridge, lo.weighted);
      });
      Json j = to_json(model);
      j["components"] = lo.components;
      ensure_parent(lo.out);
      write_json(j, lo.out);
      std::vector<int> train(use.size(), -1);
      for (std::size_t i = 0; i < use.size(); ++i)
        if (use[i]) train[i] = labels[i];
      const fs::path tl = sibling(lo.out, ".train.lbl");
      save_labels(LabelMap(nx, ny, train), tl);
      m.add_output(lo.out);
      m.add_output(tl);
    };
  });
  ldap->callback([&] {
    command = "lda-predict";
    manifest_default = sibling(lo.out, ".manifest.json");
    action = [&](RunManifest& m) {
      const Json dj = read_json(lo.dec);
      const Decomposition dec = decomposition_from_json(dj);
      const Json mj = read_json(lo.model);
      const LdaModel model = lda_from_json(mj);
      m.add_input(lo.dec);
      m.add_input(lo.model);
      const auto comps = ldap->count("--components") ? lo.components : mj.value("components", lo.components);
      const auto [nx, ny] = grid_of(dj, dec);
      const Matrix feats = select_columns(dec.scores, comps);
      const std::vector<bool> use = half_mask(lo.half_predict, nx, ny);
      std::vector<int> pred = m.timed([&] { return lda_predict(model, feats); });
      for (std::size_t i = 0; i < pred.size(); ++i)
        if (!use[i]) pred[i] = -1;
      ensure_parent(lo.out);
      save_labels(LabelMap(nx, ny, pred), lo.out);
      m.add_output(lo.out);
    };
  });

  // ---- clustering
  auto* hca_cmd = app.add_subcommand("hca", "Ward hierarchical clustering");
  auto* km_cmd = app.add_subcommand("kmeans", "k-means clustering (Minkowski metric)");
  auto* ap_cmd = app.add_subcommand("apriori", "Hierarchical clustering on distances fused with a bright-field image");
  struct {
    std::string in, out, api;
    int clusters = 8, k = 8, max_iter = 300;
    double tol = 1e-6, w = 0.2;
    std::optional<int> merge_to;
    MetricOptions metric;
  } co;
  for (auto* sub : {hca_cmd, km_cmd, ap_cmd}) {
    sub->add_option("input", co.in, "Input cube")->required()->check(CLI::ExistingFile);
    sub->add_option("-o,--output", co.out, "Output label map (LBL1); a JSON sidecar is written next to it")
        ->required();
    sub->add_option("--merge-to", co.merge_to, "Second round: merge clusters by mean spectra to this many")
        ->check(CLI::PositiveNumber);
  }
  for (auto* sub : {hca_cmd, ap_cmd}) {
    sub->add_option("--clusters", co.clusters, "Number of clusters C")->check(CLI::PositiveNumber)->capture_default_str();
    co.metric.add(sub);
  }
  km_cmd->add_option("--k", co.k, "Number of centroids K")->check(CLI::PositiveNumber)->capture_default_str();
  km_cmd->add_option("--order", co.metric.order, "Minkowski order R")->check(CLI::Range(1.0, 1e6))->capture_default_str();
  km_cmd->add_option("--max-iter", co.max_iter, "Iteration cap")->check(CLI::PositiveNumber)->capture_default_str();
  km_cmd->add_option("--tol", co.tol, "Relative inertia change to stop")->check(CLI::NonNegativeNumber)->capture_default_str();
  ap_cmd->add_option("--api", co.api, "Bright-field intensity image (MAP1), at least the cube's size")
      ->required()
      ->check(CLI::ExistingFile);
  ap_cmd->add_option("--w", co.w, "Weight of the image distances")->check(CLI::Range(0.0, 1.0))->capture_default_str();
  auto cluster_params = [&](const std::string& method) {
    Json p{{"merge_to", co.merge_to ? Json(*co.merge_to) : Json(nullptr)}};
    if (method == "kmeans") {
      p["k"] = co.k;
      p["max_iter"] = co.max_iter;
      p["tol"] = co.tol;
    } else {
      p["clusters"] = co.clusters;
    }
    if (method == "apriori") p["w"] = co.w;
    return p;
  };
  hca_cmd->callback([&] {
    command = "hca";
    manifest_default = sibling(co.out, ".manifest.json");
    action = [&](RunManifest& m) {
      const HyperCube cube = load_cube(co.in);
      m.add_input(co.in);
      const DistanceMetric metric = co.metric.build(cube.data());
      const ClusterResult res = m.timed([&] {
        return maybe_merge(cube, hca_ward(pairwise_distances(cube.data(), metric), co.clusters).first, co.merge_to);
      });
      write_cluster_outputs(cube, res, metric, co.out, cluster_params("hca"), g.seed, m);
    };
  });
  km_cmd->callback([&] {
    command = "kmeans";
    manifest_default = sibling(co.out, ".manifest.json");
    action = [&](RunManifest& m) {
      const HyperCube cube = load_cube(co.in);
      m.add_input(co.in);
      const ClusterResult res = m.timed([&] {
        return maybe_merge(cube, kmeans(cube.data(), co.k, co.metric.order, g.seed, co.max_iter, co.tol), co.merge_to);
      });
      write_cluster_outputs(cube, res, DistanceMetric::minkowski(co.metric.order), co.out, cluster_params("kmeans"),
                            g.seed, m);
    };
  });
  ap_cmd->callback([&] {
    command = "apriori";
    manifest_default = sibling(co.out, ".manifest.json");
    action = [&](RunManifest& m) {
      const HyperCube cube = load_cube(co.in);
      const FloatGrid api = load_grid(co.api);
      m.add_input(co.in);
      m.add_input(co.api);
      const DistanceMetric metric = co.metric.build(cube.data());
      const ClusterResult res = m.timed([&] {
        ClusterResult r = apriori_cluster(cube, api, co.w, metric, co.clusters);
        return co.merge_to ? merge_by_mean_spectra(cube, r, *co.merge_to) : r;
      });
      write_cluster_outputs(cube, res, metric, co.out, cluster_params("apriori"), g.seed, m);
    };
  });

  // ---- render
  auto* render = app.add_subcommand("render", "Write PPM images of maps, label maps or composites");
  struct {
    std::string kind, out, cmap = "viridis", palette = "default";
    std::vector<std::string> inputs, colors;
    double clip = 0.0;
  } ro;
  render->add_option("kind", ro.kind, "heatmap, labels or composite")
      ->required()
      ->check(CLI::IsMember({"heatmap", "labels", "composite"}));
  render->add_option("inputs", ro.inputs, "MAP1 grids (heatmap, composite) or an LBL1 label map")
      ->required()
      ->check(CLI::ExistingFile);
  render->add_option("-o,--output", ro.out, "Output PPM")->required();
  render->add_option("--cmap", ro.cmap,
                     "viridis[:lo:hi] or bicolor:COLOR:COLOR[:lo:hi]; COLOR is a name or rrggbb hex")
      ->capture_default_str();
  render->add_option("--clip-percent", ro.clip, "Auto range from percentiles (p, 100 - p) instead of min/max")
      ->check(CLI::Range(0.0, 49.0))
      ->capture_default_str();
  render->add_option("--palette", ro.palette, "Label colors: 'default' or a comma list of colors")
      ->capture_default_str();
  render->add_option("--colors", ro.colors, "Composite base colors, one per map")->delimiter(',');
  render->callback([&] {
    command = "render";
    manifest_default = sibling(ro.out, ".manifest.json");
    action = [&](RunManifest& m) {
      for (const auto& p : ro.inputs) m.add_input(p);
      ensure_parent(ro.out);
      if (ro.kind == "heatmap") {
        if (ro.inputs.size() != 1) throw ParameterError("heatmap takes exactly one grid");
        ColorMap cmap = parse_colormap(ro.cmap);
        cmap.clip_percent = ro.clip;
        const FloatGrid grid = load_grid(ro.inputs[0]);
        m.timed([&] { render_heatmap(grid, cmap, ro.out); });
      } else if (ro.kind == "labels") {
        if (ro.inputs.size() != 1) throw ParameterError("labels takes exactly one label map");
        const LabelMap labels = load_labels(ro.inputs[0]);
        const auto palette = parse_palette(ro.palette);
        m.timed([&] { render_labels_rgb(labels, palette, ro.out); });
      } else {
        std::vector<FloatGrid> maps;
        for (const auto& p : ro.inputs) maps.push_back(load_grid(p));
        std::vector<Rgb> colors;
        for (const auto& c : ro.colors) colors.push_back(parse_color(c));
        m.timed([&] { render_composite(maps, colors, ro.out); });
      }
      m.add_output(ro.out);
    };
  });

  // ---- bench
  auto* bench = app.add_subcommand("bench", "Time fitting against the multivariate methods");
  struct {
    BenchConfig cfg;
    std::string out;
  } bo;
  bench->add_option("--preset", bo.cfg.preset, "phantom or cell")
      ->check(CLI::IsMember({"phantom", "cell"}))
      ->capture_default_str();
  bench->add_option("--runs", bo.cfg.runs, "Repetitions per method")->check(CLI::PositiveNumber)->capture_default_str();
  bench->add_option("--p", bo.cfg.p, "Components for pca and vca")->check(CLI::Range(2, 1 << 20))->capture_default_str();
  bench->add_option("--clusters", bo.cfg.clusters, "HCA clusters")->check(CLI::PositiveNumber)->capture_default_str();
  bench->add_option("--k", bo.cfg.k, "k-means centroids")->check(CLI::PositiveNumber)->capture_default_str();
  bench->add_option("-o,--output", bo.out, "Report JSON")->required();
  bench->callback([&] {
    command = "bench";
    manifest_default = sibling(bo.out, ".manifest.json");
    action = [&](RunManifest& m) {
      bo.cfg.seed = g.seed;
      const Json report = m.timed([&] { return run_bench(bo.cfg); });
      ensure_parent(bo.out);
      write_json(report, bo.out);
      m.add_output(bo.out);
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    set_thread_count(g.threads);
    RunManifest manifest(command, raw);
    manifest.set_seed(g.seed);
    manifest.set_threads(thread_count());
    for (const CLI::App* sub : app.get_subcommands()) record_params(sub, manifest);
    action(manifest);
    const fs::path mpath = g.manifest.empty() ? manifest_default : fs::path(g.manifest);
    ensure_parent(mpath);
    manifest.write(mpath);
    return 0;
  } catch (const ParameterError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace brim::cli
