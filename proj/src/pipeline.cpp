#include "pnpmbir/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "pnpmbir/io.hpp"

namespace pnpmbir {

namespace {

using json = nlohmann::json;

std::mutex g_manifest_mutex;

void check_keys(const json& obj, const std::string& where, std::set<std::string> allowed) {
  if (!obj.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, _] : obj.items()) {
    if (!allowed.count(key)) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

template <typename T>
void read_field(const json& obj, const char* key, const std::string& where, T& out) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + "." + key + " has the wrong type");
  }
}

template <typename Enum, typename Parse>
void read_enum(const json& obj, const char* key, const std::string& where, Enum& out,
               Parse parse) {
  if (!obj.contains(key)) return;
  std::string name;
  read_field(obj, key, where, name);
  try {
    out = parse(name);
  } catch (const UsageError& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

/// Runs task(i) for i in [0, n) on up to `jobs` threads; rethrows the first failure.
template <typename F>
void parallel_for(std::size_t n, int jobs, F&& task) {
  const std::size_t workers = std::clamp<std::size_t>(std::size_t(std::max(jobs, 1)), 1, n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < workers; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          task(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

std::string format_mA(double mA) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", mA);
  return buf;
}

void save_new_array(const fs::path& path, const Array2d& values) {
  NdArray a;
  a.dims = {std::uint32_t(values.rows()), std::uint32_t(values.cols())};
  a.data.assign(values.data(), values.data() + values.size());
  write_new_file(path, encode_array(a));
}

void save_new_text(const fs::path& path, const std::string& text) {
  write_new_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

DoseSettings dose_at(const PipelineConfig& config, double mA) {
  DoseSettings d = config.dose;
  d.tube_current_mA = mA;
  return d;
}

/// Simulates one bundle; returns the files written.
std::vector<fs::path> write_bundle(const PipelineConfig& config, const Sino& line_integrals,
                                   double mA, const fs::path& dir,
                                   bool with_fbp) {
  const DoseSettings dose = dose_at(config, mA);
  const NoiseRealization r = sample_counts(line_integrals, dose, bundle_seed(config.seed, mA));
  const Sino y = counts_to_sinogram(r, dose);
  const StatWeights w = statistical_weights(r, dose);

  std::vector<fs::path> files{dir / "counts.pnpa", dir / "counts.meta", dir / "sinogram.pnpa",
                              dir / "weights.pnpa"};
  fs::create_directories(dir);
  save_new_array(files[0], r.counts);
  std::string meta;
  for (const auto& [k, v] : realization_metadata(r, dose)) meta += k + "=" + v + "\n";
  save_new_text(files[1], meta);
  save_new_array(files[2], y.values);
  save_new_array(files[3], w.values);
  if (with_fbp) {
    files.push_back(dir / "fbp.pnpa");
    save_new_array(files.back(), fbp_reconstruct(config.geometry, y, config.fbp_window).values);
  }
  return files;
}

}  // namespace

ReconMethod parse_recon_method(const std::string& name) {
  if (name == "fbp") return ReconMethod::FBP;
  if (name == "denoise") return ReconMethod::DenoiseOnly;
  if (name == "pnp") return ReconMethod::PnP;
  throw UsageError("unknown reconstruction method '" + name + "' (expected fbp, denoise or pnp)");
}

std::string to_string(ReconMethod method) {
  switch (method) {
    case ReconMethod::FBP: return "fbp";
    case ReconMethod::DenoiseOnly: return "denoise";
    case ReconMethod::PnP: return "pnp";
  }
  return "unknown";
}

void PipelineConfig::validate() const {
  try {
    geometry.validate();
    dose.validate();
    solver.validate();
    denoiser.validate();
  } catch (const UsageError& e) {
    throw ConfigError(e.what());
  }
  if (tube_currents_mA.empty()) throw ConfigError("dose.tube_currents_mA must not be empty");
  for (double mA : tube_currents_mA) {
    if (!(mA > 0.0)) throw ConfigError("tube currents must be positive");
  }
  if (!(metrics_window_hu.lo < metrics_window_hu.hi)) {
    throw ConfigError("metrics window width must be positive");
  }
  if (denoiser.kind == DenoiserKind::ResidualCnn && !fs::exists(*denoiser.weights_path)) {
    throw ConfigError("denoiser weights file " + *denoiser.weights_path + " does not exist");
  }
}

PipelineConfig parse_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  check_keys(root, "config",
             {"geometry", "dose", "phantom", "reconstruction", "denoiser", "solver", "metrics",
              "output_dir", "seed"});
  PipelineConfig c;

  if (root.contains("geometry")) {
    const json& g = root["geometry"];
    check_keys(g, "geometry",
               {"n_views", "n_detectors", "source_to_iso_mm", "source_to_detector_mm",
                "detector_pitch_mm", "image_n", "pixel_mm"});
    read_field(g, "n_views", "geometry", c.geometry.n_views);
    read_field(g, "n_detectors", "geometry", c.geometry.n_detectors);
    read_field(g, "source_to_iso_mm", "geometry", c.geometry.source_to_iso_mm);
    read_field(g, "source_to_detector_mm", "geometry", c.geometry.source_to_detector_mm);
    read_field(g, "detector_pitch_mm", "geometry", c.geometry.detector_pitch_mm);
    read_field(g, "image_n", "geometry", c.geometry.image_n);
    read_field(g, "pixel_mm", "geometry", c.geometry.pixel_mm);
  }
  if (root.contains("dose")) {
    const json& d = root["dose"];
    check_keys(d, "dose",
               {"tube_currents_mA", "reference_current_mA", "photons_per_ray_at_reference",
                "electronic_noise_sd", "kvp"});
    read_field(d, "tube_currents_mA", "dose", c.tube_currents_mA);
    read_field(d, "reference_current_mA", "dose", c.dose.reference_current_mA);
    read_field(d, "photons_per_ray_at_reference", "dose", c.dose.photons_per_ray_at_reference);
    read_field(d, "electronic_noise_sd", "dose", c.dose.electronic_noise_sd);
    read_field(d, "kvp", "dose", c.dose.kvp_label);
  }
  read_enum(root, "phantom", "config", c.phantom, parse_phantom_kind);
  if (root.contains("reconstruction")) {
    const json& r = root["reconstruction"];
    check_keys(r, "reconstruction", {"method", "fbp_window"});
    read_enum(r, "method", "reconstruction", c.method, parse_recon_method);
    read_enum(r, "fbp_window", "reconstruction", c.fbp_window, parse_ramp_window);
  }
  c.solver.fbp_window = c.fbp_window;
  if (root.contains("denoiser")) {
    const json& d = root["denoiser"];
    check_keys(d, "denoiser", {"kind", "strength", "weights"});
    read_enum(d, "kind", "denoiser", c.denoiser.kind, parse_denoiser_kind);
    read_field(d, "strength", "denoiser", c.denoiser.strength);
    if (d.contains("weights") && !d["weights"].is_null()) {
      std::string path;
      read_field(d, "weights", "denoiser", path);
      c.denoiser.weights_path = path;
    }
  }
  if (root.contains("solver")) {
    const json& s = root["solver"];
    check_keys(s, "solver",
               {"beta", "max_iters", "conv_tol", "cg_tol", "cg_max_iters", "warm_start",
                "normalize_data_term"});
    read_field(s, "beta", "solver", c.solver.beta);
    read_field(s, "max_iters", "solver", c.solver.max_iters);
    read_field(s, "conv_tol", "solver", c.solver.conv_tol);
    read_field(s, "cg_tol", "solver", c.solver.cg_tol);
    read_field(s, "cg_max_iters", "solver", c.solver.cg_max_iters);
    read_enum(s, "warm_start", "solver", c.solver.warm_start, parse_warm_start);
    read_field(s, "normalize_data_term", "solver", c.solver.normalize_data_term);
  }
  if (root.contains("metrics")) {
    const json& m = root["metrics"];
    check_keys(m, "metrics", {"window_level_hu", "window_width_hu"});
    double level = 30.0;
    double width = 300.0;
    read_field(m, "window_level_hu", "metrics", level);
    read_field(m, "window_width_hu", "metrics", width);
    c.metrics_window_hu = Window::from_level_width(level, width);
  }
  if (root.contains("output_dir")) {
    std::string out;
    read_field(root, "output_dir", "config", out);
    c.output_dir = out;
  }
  read_field(root, "seed", "config", c.seed);
  return c;
}

PipelineConfig load_config(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read config file " + path.string());
  std::stringstream text;
  text << f.rdbuf();
  PipelineConfig c = parse_config(text.str());
  // Relative weight paths are resolved against the config file's directory.
  if (c.denoiser.weights_path && fs::path(*c.denoiser.weights_path).is_relative()) {
    c.denoiser.weights_path = (path.parent_path() / *c.denoiser.weights_path).string();
  }
  return c;
}

std::uint64_t bundle_seed(std::uint64_t seed, double mA) {
  SplitMix64 mix(seed ^ std::uint64_t(std::llround(mA * 1000.0)) * 0xD1B54A32D192ED03ull);
  return mix();
}

std::string dose_bundle_name(double mA) { return "dose_" + format_mA(mA) + "mA"; }

std::string reference_bundle_name(const PipelineConfig& config) {
  return "reference_" + format_mA(config.dose.reference_current_mA) + "mA";
}

void append_manifest(const fs::path& out_dir, const std::vector<fs::path>& files) {
  std::vector<std::string> lines;
  for (const auto& f : files) {
    lines.push_back(sha256_file(f) + "  " + fs::relative(f, out_dir).generic_string() + "\n");
  }
  std::lock_guard lock(g_manifest_mutex);
  std::ofstream m(out_dir / "manifest.txt", std::ios::app);
  if (!m) throw IoError("cannot append to manifest in " + out_dir.string());
  for (const auto& l : lines) m << l;
  if (!m) throw IoError("failed writing manifest in " + out_dir.string());
}

SimulationOutputs cmd_simulate(const PipelineConfig& config, int jobs) {
  config.validate();
  const fs::path out = config.output_dir;
  std::error_code ec;
  fs::create_directories(out / "bundles", ec);
  if (ec) throw IoError("cannot create output directory " + out.string());

  const Image phantom =
      make_phantom(config.phantom, config.geometry.image_n, config.geometry.pixel_mm);
  const Sino line_integrals = forward_project(config.geometry, phantom);
  save_new_array(out / "phantom.pnpa", phantom.values);
  append_manifest(out, {out / "phantom.pnpa"});

  SimulationOutputs result;
  result.manifest = out / "manifest.txt";
  std::vector<double> currents = config.tube_currents_mA;
  currents.push_back(config.dose.reference_current_mA);
  std::vector<fs::path> dirs;
  for (std::size_t i = 0; i + 1 < currents.size(); ++i) {
    dirs.push_back(out / "bundles" / dose_bundle_name(currents[i]));
  }
  dirs.push_back(out / "bundles" / reference_bundle_name(config));
  for (const auto& d : dirs) {
    if (fs::exists(d)) throw IoError("bundle " + d.string() + " already exists");
  }

  parallel_for(currents.size(), jobs, [&](std::size_t i) {
    const bool reference = i + 1 == currents.size();
    const auto files = write_bundle(config, line_integrals, currents[i], dirs[i], reference);
    append_manifest(out, files);
  });
  result.dose_bundles.assign(dirs.begin(), dirs.end() - 1);
  result.reference_bundle = dirs.back();
  return result;
}

Image reconstruct_image(const PipelineConfig& config, const Sino& y, const StatWeights& w,
                        ReconMethod method, PnpState* state) {
  const auto& geom = config.geometry;
  switch (method) {
    case ReconMethod::FBP:
      return fbp_reconstruct(geom, y, config.fbp_window);
    case ReconMethod::DenoiseOnly: {
      const auto denoiser = make_denoiser(config.denoiser);
      Image fbp = fbp_reconstruct(geom, y, config.fbp_window);
      const double lo = percentile(fbp.values, 1.0);
      const double hi = percentile(fbp.values, 99.0);
      const double s = hi > lo ? hi - lo : 1.0;
      const Image normalized(((fbp.values - lo) / s).eval(), fbp.pixel_mm);
      const Image denoised = (*denoiser)(normalized);
      // fbp + s * (D(n) - n): an identity denoiser leaves the FBP bit-exact.
      fbp.values += s * (denoised.values - normalized.values);
      return fbp;
    }
    case ReconMethod::PnP: {
      const auto denoiser = make_denoiser(config.denoiser);
      PnpConfig solver = config.solver;
      solver.fbp_window = config.fbp_window;
      auto result = run_pnp(geom, y, w, *denoiser, solver);
      if (state) *state = std::move(result.state);
      return result.image;
    }
  }
  throw UsageError("unknown reconstruction method");
}

ReconstructionOutputs cmd_reconstruct(const PipelineConfig& config, const fs::path& bundle,
                                      ReconMethod method) {
  config.validate();
  if (!fs::is_directory(bundle)) throw IoError("bundle " + bundle.string() + " does not exist");
  const Sino y(read_array2(bundle / "sinogram.pnpa"));
  const StatWeights w{read_array2(bundle / "weights.pnpa")};

  const fs::path dir = config.output_dir / "recon" / bundle.filename();
  ReconstructionOutputs out;
  out.image = dir / (to_string(method) + ".pnpa");
  out.png = dir / (to_string(method) + ".png");
  if (fs::exists(out.image)) throw IoError("reconstruction " + out.image.string() + " exists");

  PnpState state;
  const Image img = reconstruct_image(config, y, w, method, &state);
  fs::create_directories(dir);
  save_new_array(out.image, img.values);
  write_png(out.png, img.hu(), config.metrics_window_hu);
  std::vector<fs::path> written{out.image, out.png};
  if (method == ReconMethod::PnP) {
    out.residual_csv = dir / "pnp_residuals.csv";
    write_residual_csv(state, *out.residual_csv);
    written.push_back(*out.residual_csv);
    out.state = std::move(state);
  }
  append_manifest(config.output_dir, written);
  return out;
}

MethodMetrics evaluate_image(const Image& img, const Image& reference, Window window_hu) {
  require_same_shape(img.values, reference.values, "evaluate");
  const Array2i q = quantize_levels(img.hu(), window_hu);
  const Array2i q_ref = quantize_levels(reference.hu(), window_hu);
  MethodMetrics m;
  m.glcm = glcm_features(q);
  m.emd = emd(level_histogram(q), level_histogram(q_ref));
  return m;
}

ReportOutputs cmd_evaluate(const PipelineConfig& config,
                           const std::map<std::string, fs::path>& reconstructions,
                           const fs::path& reference, const std::string& report_name) {
  if (!reconstructions.count("fbp")) {
    throw UsageError("evaluation needs an 'fbp' reconstruction as the baseline");
  }
  const Image ref(read_array2(reference), config.geometry.pixel_mm);
  std::map<std::string, MethodMetrics> metrics;
  for (const auto& [name, path] : reconstructions) {
    const Image img(read_array2(path), config.geometry.pixel_mm);
    metrics[name] = evaluate_image(img, ref, config.metrics_window_hu);
  }
  ReportOutputs out;
  out.rows = relative_change_report(metrics, metrics.at("fbp").glcm);
  const fs::path dir = config.output_dir / "reports";
  fs::create_directories(dir);
  out.csv = dir / (report_name + ".csv");
  out.table = dir / (report_name + ".txt");
  save_new_text(out.csv, report_csv(out.rows));
  save_new_text(out.table, report_table(out.rows));
  append_manifest(config.output_dir, {out.csv, out.table});
  return out;
}

std::map<std::string, fs::path> find_reconstructions(const PipelineConfig& config,
                                                     const std::string& bundle) {
  std::map<std::string, fs::path> found;
  const fs::path dir = config.output_dir / "recon" / bundle;
  if (!fs::is_directory(dir)) return found;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.path().extension() == ".pnpa") found[entry.path().stem().string()] = entry.path();
  }
  return found;
}

std::vector<ReportOutputs> cmd_full(const PipelineConfig& config, int jobs) {
  const auto sim = cmd_simulate(config, jobs);
  std::vector<ReportOutputs> reports(sim.dose_bundles.size());
  const fs::path reference = sim.reference_bundle / "fbp.pnpa";
  parallel_for(sim.dose_bundles.size(), jobs, [&](std::size_t i) {
    const auto& bundle = sim.dose_bundles[i];
    for (auto method : {ReconMethod::FBP, ReconMethod::DenoiseOnly, ReconMethod::PnP}) {
      cmd_reconstruct(config, bundle, method);
    }
    const std::string name = bundle.filename().string();
    reports[i] = cmd_evaluate(config, find_reconstructions(config, name), reference, name);
  });
  return reports;
}

}  // namespace pnpmbir
