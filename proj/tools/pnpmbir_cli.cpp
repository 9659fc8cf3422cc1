// pnpmbir: simulate -> reconstruct -> evaluate for the desk-scale low-dose study.
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "pnpmbir/errors.hpp"
#include "pnpmbir/pipeline.hpp"

namespace {

using namespace pnpmbir;

enum ExitCode { kOk = 0, kOther = 1, kConfig = 2, kSolver = 3, kIo = 4 };

struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> method;
  std::optional<std::string> weights;
  std::string bundle;
  int jobs = 1;
};

PipelineConfig resolve(const Options& o) {
  PipelineConfig c = o.config_path.empty() ? PipelineConfig{} : load_config(o.config_path);
  if (o.seed) c.seed = *o.seed;
  if (o.out) c.output_dir = *o.out;
  if (o.method) {
    try {
      c.method = parse_recon_method(*o.method);
    } catch (const UsageError& e) {
      throw ConfigError(e.what());
    }
  }
  if (o.weights) {
    c.denoiser.kind = DenoiserKind::ResidualCnn;
    c.denoiser.weights_path = *o.weights;
  }
  c.validate();
  return c;
}

// A bundle is given either as a directory or as a name under <out>/bundles.
fs::path bundle_dir(const PipelineConfig& c, const std::string& bundle) {
  if (fs::is_directory(bundle)) return bundle;
  return c.output_dir / "bundles" / bundle;
}

void print_report(const ReportOutputs& r) {
  std::cout << "report: " << r.csv.string() << "\n" << report_table(r.rows);
}

int run(const std::string& command, const Options& o) {
  const PipelineConfig c = resolve(o);
  if (command == "simulate") {
    const auto sim = cmd_simulate(c, o.jobs);
    for (const auto& b : sim.dose_bundles) std::cout << "bundle: " << b.string() << "\n";
    std::cout << "reference: " << sim.reference_bundle.string() << "\n";
  } else if (command == "reconstruct") {
    const auto r = cmd_reconstruct(c, bundle_dir(c, o.bundle), c.method);
    std::cout << "image: " << r.image.string() << "\n";
    if (r.state) {
      std::cout << "iterations: " << r.state->iter
                << (r.state->converged ? " (converged)" : " (not converged)") << "\n";
    }
  } else if (command == "evaluate") {
    const fs::path dir = bundle_dir(c, o.bundle);
    const std::string name = dir.filename().string();
    const fs::path reference =
        c.output_dir / "bundles" / reference_bundle_name(c) / "fbp.pnpa";
    print_report(cmd_evaluate(c, find_reconstructions(c, name), reference, name));
  } else {
    for (const auto& r : cmd_full(c, o.jobs)) print_report(r);
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PnP-MBIR ultra-low-dose CT toolkit"};
  app.require_subcommand(1, 1);
  Options o;
  app.add_option("--config", o.config_path, "JSON pipeline config")->check(CLI::ExistingFile);
  app.add_option("--seed", o.seed, "noise seed family (overrides config)");
  app.add_option("--out", o.out, "output directory (overrides config)");
  app.add_option("--jobs", o.jobs, "bundles processed concurrently")->check(CLI::PositiveNumber);

  auto* simulate = app.add_subcommand("simulate", "phantom, dose bundles and reference bundle");
  auto* reconstruct = app.add_subcommand("reconstruct", "reconstruct one dose bundle");
  reconstruct->add_option("--bundle", o.bundle, "bundle directory or name")->required();
  reconstruct->add_option("--method", o.method, "fbp, denoise or pnp");
  reconstruct->add_option("--weights", o.weights, "PNPW weights; selects the cnn denoiser");
  auto* evaluate = app.add_subcommand("evaluate", "texture report against the fbp baseline");
  evaluate->add_option("--bundle", o.bundle, "bundle directory or name")->required();
  auto* full = app.add_subcommand("full", "simulate, reconstruct every method, evaluate");
  full->add_option("--weights", o.weights, "PNPW weights; selects the cnn denoiser");
  app.fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    return run(command, o);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kConfig;
  } catch (const SolverError& e) {
    std::cerr << "solver error: " << e.what() << " (final residual " << e.final_residual()
              << ")\n";
    return kSolver;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kIo;
  } catch (const FormatError& e) {
    std::cerr << "format error: " << e.what() << "\n";
    return kIo;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kOther;
  }
}
