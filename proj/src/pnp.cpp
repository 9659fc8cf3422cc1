#include "pnpmbir/pnp.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>

namespace pnpmbir {

namespace {

double dot(const Image& a, const Image& b) { return (a.values * b.values).sum(); }

void check_weights(const FanBeamGeometry& geom, const Sino& y, const StatWeights& w) {
  detail::check_sinogram(geom, y.values.rows(), y.values.cols());
  detail::check_sinogram(geom, w.values.rows(), w.values.cols());
}

}  // namespace

WarmStart parse_warm_start(const std::string& name) {
  if (name == "fbp") return WarmStart::FBP;
  if (name == "zero") return WarmStart::Zero;
  throw UsageError("unknown warm start '" + name + "' (expected fbp or zero)");
}

std::string to_string(WarmStart w) { return w == WarmStart::FBP ? "fbp" : "zero"; }

void PnpConfig::validate() const {
  if (!(beta > 0.0)) throw UsageError("beta must be positive");
  if (max_iters < 1) throw UsageError("max_iters must be >= 1");
  if (!(conv_tol > 0.0)) throw UsageError("conv_tol must be positive");
  if (!(cg_tol > 0.0)) throw UsageError("cg_tol must be positive");
  if (cg_max_iters < 1) throw UsageError("cg_max_iters must be >= 1");
}

Image normal_operator(const FanBeamGeometry& geom, const StatWeights& w, const Image& x) {
  Sino ax = forward_project(geom, x);
  ax.values *= w.values;
  return back_project(geom, ax);
}

CgReport x_update_report(const FanBeamGeometry& geom, const Sino& y, const StatWeights& w,
                         const Image& v, const Image& u, double beta, double cg_tol,
                         int cg_max_iters, const Image* initial) {
  if (!(beta > 0.0)) throw UsageError("beta must be positive");
  check_weights(geom, y, w);
  detail::check_image(geom, v.values.rows(), v.values.cols());
  require_same_shape(v.values, u.values, "x_update v/u");

  const Array2d anchor = v.values - u.values;
  Image b = back_project(geom, Sino((w.values * y.values).eval()));
  b.values += beta * anchor;
  const double b_norm = std::sqrt(dot(b, b));

  CgReport report;
  report.x = initial ? *initial : Image(anchor, v.pixel_mm);
  if (b_norm == 0.0) {
    report.x.values.setZero();
    return report;
  }

  auto apply = [&](const Image& p) {
    Image q = normal_operator(geom, w, p);
    q.values += beta * p.values;
    return q;
  };

  Image r = b;
  r.values -= apply(report.x).values;
  double rr = dot(r, r);
  report.relative_residual = std::sqrt(rr) / b_norm;
  Image p = r;
  while (report.relative_residual > cg_tol) {
    if (report.iterations >= cg_max_iters) {
      throw SolverError("conjugate gradients did not reach relative residual " +
                            std::to_string(cg_tol) + " within " +
                            std::to_string(cg_max_iters) + " iterations (final " +
                            std::to_string(report.relative_residual) + ")",
                        report.relative_residual);
    }
    const Image ap = apply(p);
    const double alpha = rr / dot(p, ap);
    report.x.values += alpha * p.values;
    r.values -= alpha * ap.values;
    const double rr_next = dot(r, r);
    p.values = r.values + (rr_next / rr) * p.values;
    rr = rr_next;
    ++report.iterations;
    report.relative_residual = std::sqrt(rr) / b_norm;
  }
  return report;
}

Image v_update(const Denoiser& denoiser, const Image& x_new, const Image& u) {
  require_same_shape(x_new.values, u.values, "v_update");
  return denoiser(Image(x_new.values + u.values, x_new.pixel_mm));
}

Image dual_update(const Image& u, const Image& x_new, const Image& v_new) {
  require_same_shape(u.values, x_new.values, "dual_update");
  require_same_shape(u.values, v_new.values, "dual_update");
  return Image(u.values + x_new.values - v_new.values, u.pixel_mm);
}

double convergence_metric(const Image& x0, const Image& v0, const Image& u0, const Image& x1,
                          const Image& v1, const Image& u1) {
  require_same_shape(x0.values, x1.values, "convergence_metric");
  require_same_shape(v0.values, v1.values, "convergence_metric");
  require_same_shape(u0.values, u1.values, "convergence_metric");
  const double n = double(x0.size());
  if (n == 0) return 0.0;
  const double sum = (x1.values - x0.values).square().sum() +
                     (v1.values - v0.values).square().sum() +
                     (u1.values - u0.values).square().sum();
  return sum / (3.0 * n);
}

double convergence_metric(const PnpState& prev, const PnpState& next) {
  return convergence_metric(prev.x, prev.v, prev.u, next.x, next.v, next.u);
}

double data_term_scale(const FanBeamGeometry& geom, const StatWeights& w, int iterations) {
  Image x(Array2d::Ones(geom.image_n, geom.image_n), geom.pixel_mm);
  x.values /= std::sqrt(double(x.size()));
  double lambda = 0.0;
  for (int k = 0; k < iterations; ++k) {
    Image mx = normal_operator(geom, w, x);
    lambda = dot(x, mx);
    const double norm = std::sqrt(dot(mx, mx));
    if (norm == 0.0) return 0.0;
    x.values = mx.values / norm;
  }
  return lambda;
}

double percentile(const Array2d& values, double q) {
  if (values.size() == 0) throw InputError("percentile of an empty array");
  std::vector<double> v(values.data(), values.data() + values.size());
  const double rank = std::clamp(q, 0.0, 100.0) / 100.0 * double(v.size() - 1);
  const auto k = std::size_t(std::llround(rank));
  std::nth_element(v.begin(), v.begin() + std::ptrdiff_t(k), v.end());
  return v[k];
}

PnpResult run_pnp(const FanBeamGeometry& geom, const Sino& y, const StatWeights& w,
                  const Denoiser& denoiser, const PnpConfig& config) {
  config.validate();
  geom.validate();
  check_weights(geom, y, w);
  if (!y.all_finite() || !w.values.isFinite().all()) {
    throw InputError("sinogram and weights must be finite");
  }

  PnpState state;
  const Image fbp = fbp_reconstruct(geom, y, config.fbp_window);
  state.window_lo = percentile(fbp.values, 1.0);
  const double hi = percentile(fbp.values, 99.0);
  state.window_scale = hi > state.window_lo ? hi - state.window_lo : 1.0;
  const double lo = state.window_lo;
  const double s = state.window_scale;

  const Image lo_image(Array2d::Constant(geom.image_n, geom.image_n, lo), geom.pixel_mm);
  const Sino y_norm(((y.values - forward_project(geom, lo_image).values) / s).eval());

  StatWeights w_eff = w;
  if (config.normalize_data_term) {
    const double scale = data_term_scale(geom, w);
    if (scale > 0.0) {
      state.data_scale = scale;
      w_eff.values /= scale;
    }
  }

  const Index n = geom.image_n;
  if (config.warm_start == WarmStart::FBP) {
    state.x = Image(((fbp.values - lo) / s).eval(), geom.pixel_mm);
  } else {
    state.x = Image(n, geom.pixel_mm);
  }
  state.v = state.x;
  state.u = Image(n, geom.pixel_mm);

  int rises = 0;
  while (true) {
    PnpState next;
    const auto cg = x_update_report(geom, y_norm, w_eff, state.v, state.u, config.beta,
                                    config.cg_tol, config.cg_max_iters, &state.x);
    next.x = cg.x;
    next.v = v_update(denoiser, next.x, state.u);
    next.u = dual_update(state.u, next.x, next.v);
    const double metric = convergence_metric(state, next);

    IterationRecord rec;
    rec.iter = state.iter + 1;
    rec.metric = metric;
    Sino resid = forward_project(geom, next.x);
    resid.values -= y_norm.values;
    rec.data_fidelity = 0.5 * (w_eff.values * resid.values.square()).sum();
    rec.constraint_gap = std::sqrt((next.x.values - next.v.values).square().mean());
    rec.cg_iterations = cg.iterations;

    if (!state.residual_history.empty() && metric > state.residual_history.back()) {
      ++rises;
    } else {
      rises = 0;
    }

    state.x = std::move(next.x);
    state.v = std::move(next.v);
    state.u = std::move(next.u);
    state.iter = rec.iter;
    state.residual_history.push_back(metric);
    state.log.push_back(rec);

    if (metric <= config.conv_tol) {
      state.converged = true;
      break;
    }
    if (rises >= 3) {
      state.non_monotone = true;
      break;
    }
    if (state.iter >= config.max_iters) {
      state.hit_max_iters = true;
      break;
    }
  }

  PnpResult result;
  result.image = Image((state.v.values * s + lo).eval(), geom.pixel_mm);
  result.state = std::move(state);
  return result;
}

void write_residual_csv(const PnpState& state, const std::filesystem::path& path) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f << "iter,metric,data_fidelity,constraint_gap\n";
  f << std::setprecision(17);
  for (const auto& r : state.log) {
    f << r.iter << ',' << r.metric << ',' << r.data_fidelity << ',' << r.constraint_gap << '\n';
  }
  if (!f) throw IoError("failed writing " + path.string());
}

}  // namespace pnpmbir
