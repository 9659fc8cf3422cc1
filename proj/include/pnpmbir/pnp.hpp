#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "pnpmbir/denoisers.hpp"
#include "pnpmbir/dose.hpp"
#include "pnpmbir/geometry.hpp"

namespace pnpmbir {

enum class WarmStart { FBP, Zero };

WarmStart parse_warm_start(const std::string& name);
std::string to_string(WarmStart w);

struct PnpConfig {
  double beta = 1.2;
  int max_iters = 20;
  double conv_tol = 1e-4;
  double cg_tol = 1e-8;
  int cg_max_iters = 200;
  WarmStart warm_start = WarmStart::FBP;
  RampWindow fbp_window = RampWindow::Hann;
  /// Divide W by the largest eigenvalue of A^T W A before iterating.
  bool normalize_data_term = true;

  void validate() const;
};

/// Per-iteration diagnostics, all in the normalized image space.
struct IterationRecord {
  int iter = 0;
  double metric = 0.0;
  double data_fidelity = 0.0;   // 0.5 * ||A x - y||_W^2
  double constraint_gap = 0.0;  // ||x - v|| / sqrt(N)
  int cg_iterations = 0;
};

/// ADMM iterate triple. x, v and u live in the normalized space
/// (physical = window_lo + window_scale * normalized).
struct PnpState {
  Image x, v, u;
  int iter = 0;
  std::vector<double> residual_history;
  std::vector<IterationRecord> log;

  bool converged = false;
  bool hit_max_iters = false;
  bool non_monotone = false;

  double window_lo = 0.0;
  double window_scale = 1.0;
  /// Factor W was divided by (1 when normalization is off).
  double data_scale = 1.0;
};

struct PnpResult {
  Image image;  // de-normalized v at exit
  PnpState state;
};

struct CgReport {
  Image x;
  int iterations = 0;
  double relative_residual = 0.0;
};

/// Applies A^T W A.
Image normal_operator(const FanBeamGeometry& geom, const StatWeights& w, const Image& x);

/// Solves (A^T W A + beta I) x = A^T W y + beta (v - u) by matrix-free conjugate
/// gradients, starting from `initial` (v - u when null). Throws SolverError when the
/// relative residual is still above cg_tol after cg_max_iters iterations.
CgReport x_update_report(const FanBeamGeometry& geom, const Sino& y, const StatWeights& w,
                         const Image& v, const Image& u, double beta, double cg_tol,
                         int cg_max_iters, const Image* initial = nullptr);

inline Image x_update(const FanBeamGeometry& geom, const Sino& y, const StatWeights& w,
                      const Image& v, const Image& u, double beta, double cg_tol,
                      int cg_max_iters) {
  return x_update_report(geom, y, w, v, u, beta, cg_tol, cg_max_iters).x;
}

/// v = D(x + u).
Image v_update(const Denoiser& denoiser, const Image& x_new, const Image& u);

/// u + x - v.
Image dual_update(const Image& u, const Image& x_new, const Image& v_new);

/// (||dx||^2 + ||dv||^2 + ||du||^2) / (3 N).
double convergence_metric(const PnpState& prev, const PnpState& next);
double convergence_metric(const Image& x0, const Image& v0, const Image& u0, const Image& x1,
                          const Image& v1, const Image& u1);

/// Largest eigenvalue of A^T W A by power iteration from the all-ones image.
double data_term_scale(const FanBeamGeometry& geom, const StatWeights& w, int iterations = 20);

/// Full PnP-ADMM reconstruction. Normalizes to the warm-start FBP's 1st-99th
/// percentile window, iterates x -> v -> u until the metric drops to conv_tol,
/// max_iters is reached, or the metric rises three times in a row.
PnpResult run_pnp(const FanBeamGeometry& geom, const Sino& y, const StatWeights& w,
                  const Denoiser& denoiser, const PnpConfig& config);

/// CSV with columns iter, metric, data_fidelity, constraint_gap.
void write_residual_csv(const PnpState& state, const std::filesystem::path& path);

/// Nearest-rank percentile (q in [0, 100]) of all entries.
double percentile(const Array2d& values, double q);

}  // namespace pnpmbir
