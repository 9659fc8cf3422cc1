#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "doctest.h"
#include "oracles.hpp"
#include "pnpmbir/io.hpp"
#include "pnpmbir/pipeline.hpp"

using namespace pnpmbir;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("pnpmbir_" + name);
  fs::remove_all(dir);
  return dir;
}

PipelineConfig small_config(const fs::path& out) {
  PipelineConfig c;
  c.geometry.image_n = 64;
  c.geometry.n_views = 180;
  c.geometry.n_detectors = 128;
  c.output_dir = out;
  c.seed = 99;
  return c;
}

std::vector<std::string> manifest_hashes(const fs::path& out) {
  std::ifstream f(out / "manifest.txt");
  std::vector<std::string> lines;
  for (std::string line; std::getline(f, line);) lines.push_back(line);
  std::sort(lines.begin(), lines.end());
  return lines;
}

double rmse(const Array2d& a, const Array2d& b) { return std::sqrt((a - b).square().mean()); }

std::string slurp(const fs::path& p) {
  std::ifstream f(p);
  std::stringstream s;
  s << f.rdbuf();
  return s.str();
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(PNPMBIR_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_SUITE("pipeline") {

TEST_CASE("config parsing") {
  const auto c = parse_config(R"({
    "geometry": {"n_views": 90, "image_n": 32, "n_detectors": 64},
    "dose": {"tube_currents_mA": [20, 40], "photons_per_ray_at_reference": 1e5},
    "phantom": "disk_grid",
    "reconstruction": {"method": "fbp", "fbp_window": "ramlak"},
    "denoiser": {"kind": "gaussian", "strength": 0.8},
    "solver": {"beta": 2.0, "warm_start": "zero"},
    "metrics": {"window_level_hu": 40, "window_width_hu": 400},
    "output_dir": "elsewhere",
    "seed": 7
  })");
  CHECK(c.geometry.n_views == 90);
  CHECK(c.tube_currents_mA == std::vector<double>{20, 40});
  CHECK(c.dose.photons_per_ray_at_reference == 1e5);
  CHECK(c.phantom == PhantomKind::DiskGrid);
  CHECK(c.method == ReconMethod::FBP);
  CHECK(c.fbp_window == RampWindow::RamLak);
  CHECK(c.solver.fbp_window == RampWindow::RamLak);
  CHECK(c.denoiser.kind == DenoiserKind::Gaussian);
  CHECK(c.solver.beta == 2.0);
  CHECK(c.solver.warm_start == WarmStart::Zero);
  CHECK(c.metrics_window_hu.lo == -160.0);
  CHECK(c.output_dir == "elsewhere");
  CHECK(c.seed == 7);
  CHECK_NOTHROW(c.validate());

  CHECK_THROWS_AS(parse_config(R"({"geometry": {"n_veiws": 3}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"colour": 1})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"seed": "seven"})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"phantom": "brain"})"), ConfigError);
  CHECK_THROWS_AS(parse_config("{not json"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"dose": {"tube_currents_mA": []}})").validate(), ConfigError);
  CHECK_THROWS_AS(
      parse_config(R"({"denoiser": {"kind": "cnn", "weights": "/nonexistent.pnpw"}})").validate(),
      ConfigError);
}

TEST_CASE("simulate writes one bundle per current plus the reference") {
  const fs::path out = fresh_dir("sim");
  auto c = small_config(out);
  const auto sim = cmd_simulate(c);
  REQUIRE(sim.dose_bundles.size() == 1);
  int dirs = 0;
  for (const auto& e : fs::directory_iterator(out / "bundles")) dirs += e.is_directory();
  CHECK(dirs == 2);
  for (const char* f : {"counts.pnpa", "counts.meta", "sinogram.pnpa", "weights.pnpa"}) {
    CHECK(fs::exists(sim.dose_bundles[0] / f));
    CHECK(fs::exists(sim.reference_bundle / f));
  }
  CHECK(fs::exists(sim.reference_bundle / "fbp.pnpa"));
  CHECK(fs::exists(out / "phantom.pnpa"));
  CHECK(manifest_hashes(out).size() == 10);
  CHECK(dose_from_metadata(read_metadata(sim.dose_bundles[0] / "counts.meta")).tube_current_mA ==
        40.0);

  // Outputs are append-only.
  CHECK_THROWS_AS(cmd_simulate(c), IoError);
  fs::remove_all(out);
}

TEST_CASE("simulation is reproducible from config and seed") {
  const fs::path a = fresh_dir("rep_a");
  const fs::path b = fresh_dir("rep_b");
  auto ca = small_config(a);
  ca.tube_currents_mA = {40, 80};
  auto cb = ca;
  cb.output_dir = b;
  cmd_simulate(ca, 2);
  cmd_simulate(cb, 1);
  CHECK(manifest_hashes(a) == manifest_hashes(b));
  auto cc = ca;
  cc.output_dir = fresh_dir("rep_c");
  cc.seed = 100;
  cmd_simulate(cc);
  CHECK(manifest_hashes(a) != manifest_hashes(cc.output_dir));
  for (const auto& d : {a, b, cc.output_dir}) fs::remove_all(d);
}

TEST_CASE("lower current gives a noisier sinogram") {
  const fs::path out = fresh_dir("var");
  auto c = small_config(out);
  c.tube_currents_mA = {40, 200};
  const auto sim = cmd_simulate(c);
  const Image phantom(read_array2(out / "phantom.pnpa"), 1.0);
  const auto clean = forward_project(c.geometry, phantom).values;
  auto noise_var = [&](const fs::path& bundle) {
    const Array2d y = read_array2(bundle / "sinogram.pnpa");
    const Array2d e = y - clean;
    return (e - e.mean()).square().mean();
  };
  CHECK(noise_var(out / "bundles" / dose_bundle_name(40)) >
        noise_var(out / "bundles" / dose_bundle_name(200)));
  fs::remove_all(out);
}

TEST_CASE("reconstruct delegates and composes") {
  const fs::path out = fresh_dir("recon");
  auto c = small_config(out);
  c.denoiser = {DenoiserKind::Identity, 0.0, std::nullopt};
  const auto sim = cmd_simulate(c);
  const fs::path bundle = sim.dose_bundles[0];
  const Sino y(read_array2(bundle / "sinogram.pnpa"));

  const auto fbp = cmd_reconstruct(c, bundle, ReconMethod::FBP);
  const Array2d fbp_img = read_array2(fbp.image);
  CHECK((fbp_img == fbp_reconstruct(c.geometry, y, c.fbp_window).values).all());
  CHECK(fs::exists(fbp.png));
  CHECK_FALSE(fbp.residual_csv.has_value());

  const auto den = cmd_reconstruct(c, bundle, ReconMethod::DenoiseOnly);
  CHECK((read_array2(den.image) == fbp_img).all());

  const auto pnp = cmd_reconstruct(c, bundle, ReconMethod::PnP);
  REQUIRE(pnp.residual_csv.has_value());
  const auto csv = slurp(*pnp.residual_csv);
  CHECK(csv.rfind("iter,metric,data_fidelity,constraint_gap\n", 0) == 0);
  CHECK(find_reconstructions(c, bundle.filename().string()).size() == 3);

  CHECK_THROWS_AS(cmd_reconstruct(c, bundle, ReconMethod::FBP), IoError);
  CHECK_THROWS_AS(cmd_reconstruct(c, out / "bundles" / "nope", ReconMethod::FBP), IoError);
  fs::remove_all(out);
}

TEST_CASE("identity-prior PnP beats FBP on a nearly noiseless bundle") {
  const fs::path out = fresh_dir("noiseless");
  auto c = small_config(out);
  c.phantom = PhantomKind::SheppLogan;
  c.dose.photons_per_ray_at_reference = 1e13;
  c.dose.electronic_noise_sd = 0.0;
  c.tube_currents_mA = {800};
  c.denoiser = {DenoiserKind::Identity, 0.0, std::nullopt};
  c.solver.max_iters = 10;
  c.solver.conv_tol = 1e-12;
  const auto sim = cmd_simulate(c);
  const Array2d phantom = read_array2(out / "phantom.pnpa");
  const auto fbp = read_array2(cmd_reconstruct(c, sim.dose_bundles[0], ReconMethod::FBP).image);
  const auto pnp = read_array2(cmd_reconstruct(c, sim.dose_bundles[0], ReconMethod::PnP).image);
  CHECK(rmse(pnp, phantom) < rmse(fbp, phantom));
  fs::remove_all(out);
}

TEST_CASE("evaluate against itself and without a baseline") {
  const fs::path out = fresh_dir("eval");
  auto c = small_config(out);
  const auto sim = cmd_simulate(c);
  const auto fbp = cmd_reconstruct(c, sim.dose_bundles[0], ReconMethod::FBP);
  const auto self = cmd_evaluate(c, {{"fbp", fbp.image}}, fbp.image, "self");
  REQUIRE(self.rows.size() == 1);
  CHECK(self.rows[0].metrics.emd == 0.0);
  for (const auto& pct : self.rows[0].pct_change) CHECK(*pct == 0.0);

  const auto pnp = cmd_reconstruct(c, sim.dose_bundles[0], ReconMethod::PnP);
  const auto two = cmd_evaluate(c, {{"fbp", fbp.image}, {"pnp", pnp.image}},
                                sim.reference_bundle / "fbp.pnpa", "two");
  CHECK(two.rows.size() == 2);
  CHECK(fs::exists(two.csv));
  CHECK(fs::exists(two.table));
  CHECK_THROWS_AS(cmd_evaluate(c, {{"pnp", pnp.image}}, fbp.image, "none"), UsageError);
  fs::remove_all(out);
}

TEST_CASE("emd grows with added noise") {
  std::mt19937_64 rng(61);
  const Image ref = make_phantom(PhantomKind::SoftTissueSlab, 64);
  std::normal_distribution<double> nd(0.0, 1.0);
  Array2d noise(64, 64);
  for (Index i = 0; i < noise.size(); ++i) noise.data()[i] = nd(rng);
  const Window w = default_hu_window();
  double last = evaluate_image(ref, ref, w).emd;
  CHECK(last == 0.0);
  for (double sigma_hu : {5.0, 20.0, 80.0}) {
    const Image noisy((ref.values + noise * (sigma_hu * kMuWater / 1000.0)).eval(), 1.0);
    const double e = evaluate_image(noisy, ref, w).emd;
    CHECK(e > last);
    last = e;
  }
}

TEST_CASE("cli exit codes") {
  const fs::path out = fresh_dir("cli");
  fs::create_directories(out);
  const fs::path cfg = out / "config.json";
  std::ofstream(cfg) << R"({"geometry": {"image_n": 32, "n_views": 90, "n_detectors": 64},
                           "output_dir": ")" << (out / "run").string() << "\"}";
  CHECK(run_cli("--config " + cfg.string() + " full") == 0);
  CHECK(fs::exists(out / "run" / "reports" / "dose_40mA.csv"));
  CHECK(run_cli("--config " + cfg.string() + " simulate") == 4);
  CHECK(run_cli("--config " + cfg.string() + " reconstruct --bundle missing") == 4);
  CHECK(run_cli("--config " + cfg.string() + " reconstruct --bundle dose_40mA --method magic") ==
        2);

  const fs::path bad = out / "bad.json";
  std::ofstream(bad) << R"({"geometry": {"pixels": 3}})";
  CHECK(run_cli("--config " + bad.string() + " simulate") == 2);
  CHECK(run_cli("frobnicate") == 2);

  const fs::path strict = out / "strict.json";
  std::ofstream(strict) << R"({"geometry": {"image_n": 32, "n_views": 90, "n_detectors": 64},
                              "solver": {"cg_tol": 1e-15, "cg_max_iters": 1},
                              "output_dir": ")" << (out / "run").string() << "\"}";
  CHECK(run_cli("--config " + strict.string() + " reconstruct --method pnp --bundle " +
                (out / "run" / "bundles" / "reference_800mA").string()) == 3);
  fs::remove_all(out);
}

}
