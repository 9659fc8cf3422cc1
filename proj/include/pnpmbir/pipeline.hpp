#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pnpmbir/denoisers.hpp"
#include "pnpmbir/dose.hpp"
#include "pnpmbir/metrics.hpp"
#include "pnpmbir/phantom.hpp"
#include "pnpmbir/pnp.hpp"

namespace pnpmbir {

namespace fs = std::filesystem;

enum class ReconMethod { FBP, DenoiseOnly, PnP };

ReconMethod parse_recon_method(const std::string& name);
std::string to_string(ReconMethod method);

/// Everything one simulate -> reconstruct -> evaluate run needs. Loaded from a JSON
/// file whose schema is documented in docs/config.md; unknown keys are rejected.
struct PipelineConfig {
  FanBeamGeometry geometry;
  std::vector<double> tube_currents_mA{40.0};
  /// Reference current, photon budget, electronic noise, kVp label. The tube
  /// current field is overwritten per bundle.
  DoseSettings dose;
  PhantomKind phantom = PhantomKind::SoftTissueSlab;
  ReconMethod method = ReconMethod::PnP;
  RampWindow fbp_window = RampWindow::Hann;
  DenoiserSpec denoiser{DenoiserKind::TvProx, 0.05, std::nullopt};
  PnpConfig solver;
  Window metrics_window_hu = default_hu_window();
  fs::path output_dir = "out";
  std::uint64_t seed = 1234;

  /// Throws ConfigError (bad values, empty mA list, missing weight files).
  void validate() const;
};

PipelineConfig parse_config(const std::string& json_text);
PipelineConfig load_config(const fs::path& path);

/// Seed of the bundle simulated at `mA` within the seed family `seed`.
std::uint64_t bundle_seed(std::uint64_t seed, double mA);

std::string dose_bundle_name(double mA);
std::string reference_bundle_name(const PipelineConfig& config);

struct SimulationOutputs {
  std::vector<fs::path> dose_bundles;
  fs::path reference_bundle;
  fs::path manifest;
};

/// Writes the phantom, one bundle per configured mA (counts, metadata, sinogram,
/// weights) and the reference bundle (plus its FBP), then appends to the manifest.
SimulationOutputs cmd_simulate(const PipelineConfig& config, int jobs = 1);

struct ReconstructionOutputs {
  fs::path image;
  fs::path png;
  std::optional<fs::path> residual_csv;
  std::optional<PnpState> state;
};

/// Reconstructs one bundle with `method` into <out>/recon/<bundle>/<method>.*.
ReconstructionOutputs cmd_reconstruct(const PipelineConfig& config, const fs::path& bundle,
                                      ReconMethod method);

/// In-memory reconstruction used by cmd_reconstruct.
Image reconstruct_image(const PipelineConfig& config, const Sino& y, const StatWeights& w,
                        ReconMethod method, PnpState* state = nullptr);

/// Metrics of one image in HU against a reference image.
MethodMetrics evaluate_image(const Image& img, const Image& reference, Window window_hu);

struct ReportOutputs {
  fs::path csv;
  fs::path table;
  std::vector<ReportRow> rows;
};

/// Report with "fbp" as baseline. Written to <out>/reports/<report_name>.{csv,txt}.
ReportOutputs cmd_evaluate(const PipelineConfig& config,
                           const std::map<std::string, fs::path>& reconstructions,
                           const fs::path& reference, const std::string& report_name);

/// Reconstructions found under <out>/recon/<bundle>/ keyed by method name.
std::map<std::string, fs::path> find_reconstructions(const PipelineConfig& config,
                                                     const std::string& bundle);

/// simulate, then every method on every dose bundle, then one report per bundle.
std::vector<ReportOutputs> cmd_full(const PipelineConfig& config, int jobs = 1);

/// Appends "sha256  relative-path" lines under a process-wide lock.
void append_manifest(const fs::path& out_dir, const std::vector<fs::path>& files);

}  // namespace pnpmbir
