#include "pnpmbir/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace pnpmbir {

namespace {

constexpr double kPi = std::numbers::pi;

/// Closed-form Ram-Lak tap at integer lag k for unit spacing.
double ram_lak_tap(Index k) {
  if (k == 0) return 0.25;
  if (k % 2 == 0) return 0.0;
  return -1.0 / (kPi * kPi * double(k) * double(k));
}

/// Periodized ramp kernel of period n, built from its exact DFT samples |f| * window(f).
std::vector<double> periodic_ramp_kernel(Index n, RampWindow window) {
  std::vector<double> response(n);
  for (Index m = 0; m < n; ++m) {
    const double f = double(std::min(m, n - m)) / double(n);
    double h = f;
    if (window == RampWindow::Hann) h *= 0.5 * (1.0 + std::cos(2.0 * kPi * f));
    response[m] = h;
  }
  std::vector<double> kernel(n, 0.0);
  for (Index k = 0; k < n; ++k) {
    double acc = 0.0;
    for (Index m = 0; m < n; ++m) {
      // Reduce m*k mod n before the cosine to keep the argument small.
      acc += response[m] * std::cos(2.0 * kPi * double((m * k) % n) / double(n));
    }
    kernel[k] = acc / double(n);
  }
  return kernel;
}

}  // namespace

void FanBeamGeometry::validate() const {
  auto fail = [](const std::string& msg) { throw UsageError("invalid geometry: " + msg); };
  if (n_views < 1) fail("n_views must be >= 1");
  if (n_detectors < 1) fail("n_detectors must be >= 1");
  if (image_n < 1) fail("image_n must be >= 1");
  if (!(pixel_mm > 0.0)) fail("pixel_mm must be positive");
  if (!(detector_pitch_mm > 0.0)) fail("detector_pitch_mm must be positive");
  if (!(source_to_iso_mm > 0.0)) fail("source_to_iso_mm must be positive");
  if (!(source_to_detector_mm > source_to_iso_mm)) {
    fail("source_to_detector_mm must exceed source_to_iso_mm");
  }
  const double extent = image_n * pixel_mm;
  if (!(source_to_iso_mm > extent / std::sqrt(2.0))) {
    fail("source lies inside the image support");
  }
  const double needed = std::asin(std::min(1.0, extent / (2.0 * source_to_iso_mm)));
  if (half_fan_angle() < needed) {
    fail("fan does not cover the reconstruction circle (half-fan " +
         std::to_string(half_fan_angle()) + " rad < " + std::to_string(needed) + " rad)");
  }
}

RampWindow parse_ramp_window(const std::string& name) {
  if (name == "ramlak" || name == "ram-lak" || name == "RamLak") return RampWindow::RamLak;
  if (name == "hann" || name == "Hann") return RampWindow::Hann;
  throw UsageError("unknown ramp window '" + name + "' (expected ramlak or hann)");
}

std::string to_string(RampWindow window) {
  return window == RampWindow::RamLak ? "ramlak" : "hann";
}

std::vector<double> ramp_kernel_taps(Index half, RampWindow window, double spacing) {
  const double scale = 1.0 / (spacing * spacing);
  std::vector<double> taps(2 * half + 1);
  for (Index k = -half; k <= half; ++k) {
    double h = ram_lak_tap(k);
    if (window == RampWindow::Hann) {
      h = 0.5 * h + 0.25 * (ram_lak_tap(k - 1) + ram_lak_tap(k + 1));
    }
    taps[k + half] = h * scale;
  }
  return taps;
}

namespace detail {

void check_image(const FanBeamGeometry& geom, Index rows, Index cols) {
  if (rows != geom.image_n || cols != geom.image_n) {
    throw DimensionError("image is " + std::to_string(rows) + "x" + std::to_string(cols) +
                         ", geometry expects " + std::to_string(geom.image_n) + "x" +
                         std::to_string(geom.image_n));
  }
}

void check_sinogram(const FanBeamGeometry& geom, Index rows, Index cols) {
  if (rows != geom.n_views || cols != geom.n_detectors) {
    throw DimensionError("sinogram is " + std::to_string(rows) + "x" + std::to_string(cols) +
                         ", geometry expects " + std::to_string(geom.n_views) + "x" +
                         std::to_string(geom.n_detectors));
  }
}

JosephRay make_joseph_ray(const FanBeamGeometry& geom, Index view, Index det) {
  const double beta = geom.view_angle(view);
  const double gamma = geom.detector_angle(det);
  const double sx = geom.source_to_iso_mm * std::cos(beta);
  const double sy = geom.source_to_iso_mm * std::sin(beta);
  // Central ray points from the source to the isocenter; rotate it by gamma.
  const double cx = -std::cos(beta);
  const double cy = -std::sin(beta);
  const double dx = cx * std::cos(gamma) - cy * std::sin(gamma);
  const double dy = cx * std::sin(gamma) + cy * std::cos(gamma);

  const double p = geom.pixel_mm;
  const double c = 0.5 * (geom.image_n - 1);
  JosephRay ray{};
  if (std::abs(dx) >= std::abs(dy)) {
    const double r = dy / dx;
    ray.x_major = true;
    ray.origin = c - sy / p + (c + sx / p) * r;
    ray.slope = -r;
    ray.weight = p / std::abs(dx);
  } else {
    const double r = dx / dy;
    ray.x_major = false;
    ray.origin = c + sx / p + (c - sy / p) * r;
    ray.slope = -r;
    ray.weight = p / std::abs(dy);
  }
  return ray;
}

}  // namespace detail

template <typename Scalar>
Sinogram<Scalar> ramp_filter(const Sinogram<Scalar>& sino, RampWindow window) {
  const Index n = sino.n_detectors();
  if (n < 2) throw DimensionError("ramp_filter needs at least 2 detector columns");
  const auto kernel = periodic_ramp_kernel(n, window);
  Sinogram<Scalar> out(sino.n_views(), n);
  for (Index v = 0; v < sino.n_views(); ++v) {
    for (Index i = 0; i < n; ++i) {
      double acc = 0.0;
      for (Index j = 0; j < n; ++j) {
        Index lag = i - j;
        if (lag < 0) lag += n;
        acc += double(sino.values(v, j)) * kernel[lag];
      }
      out.values(v, i) = Scalar(acc);
    }
  }
  return out;
}

template <typename Scalar>
ImageGrid<Scalar> fbp_reconstruct(const FanBeamGeometry& geom, const Sinogram<Scalar>& sino,
                                  RampWindow window) {
  geom.validate();
  detail::check_sinogram(geom, sino.values.rows(), sino.values.cols());
  const Index nd = geom.n_detectors;
  const Index n = geom.image_n;
  const double alpha = geom.angular_pitch();
  const double radius = geom.source_to_iso_mm;

  // Equiangular kernel: 0.5 * (g / sin g)^2 * h(g), linear convolution over all lags.
  const Index half = std::max<Index>(nd - 1, 1);
  auto taps = ramp_kernel_taps(half, window, alpha);
  for (Index k = -half; k <= half; ++k) {
    const double g = double(k) * alpha;
    const double ratio = k == 0 ? 1.0 : g / std::sin(g);
    taps[k + half] *= 0.5 * ratio * ratio;
  }

  std::vector<double> weighted(nd);
  std::vector<double> filtered(nd);
  Array2d acc = Array2d::Zero(n, n);
  const double c = 0.5 * (n - 1);
  const double det_center = 0.5 * (nd - 1);

  for (Index view = 0; view < geom.n_views; ++view) {
    for (Index d = 0; d < nd; ++d) {
      weighted[d] = double(sino.values(view, d)) * radius * std::cos(geom.detector_angle(d));
    }
    for (Index i = 0; i < nd; ++i) {
      double s = 0.0;
      for (Index d = 0; d < nd; ++d) s += weighted[d] * taps[i - d + half];
      filtered[i] = alpha * s;
    }

    const double beta = geom.view_angle(view);
    const double sx = radius * std::cos(beta);
    const double sy = radius * std::sin(beta);
    const double cx = -std::cos(beta);
    const double cy = -std::sin(beta);
    for (Index row = 0; row < n; ++row) {
      const double y = (c - double(row)) * geom.pixel_mm;
      for (Index col = 0; col < n; ++col) {
        const double x = (double(col) - c) * geom.pixel_mm;
        const double dx = x - sx;
        const double dy = y - sy;
        const double gamma = std::atan2(cx * dy - cy * dx, cx * dx + cy * dy);
        const double pos = gamma / alpha + det_center;
        const double fl = std::floor(pos);
        const Index d0 = Index(fl);
        const double w1 = pos - fl;
        double q = 0.0;
        if (d0 >= 0 && d0 < nd) q += (1.0 - w1) * filtered[d0];
        if (d0 + 1 >= 0 && d0 + 1 < nd) q += w1 * filtered[d0 + 1];
        acc(row, col) += q / (dx * dx + dy * dy);
      }
    }
  }
  acc *= 2.0 * std::numbers::pi / double(geom.n_views);
  return ImageGrid<Scalar>(acc.cast<Scalar>(), geom.pixel_mm);
}

template Sinogram<double> forward_project(const FanBeamGeometry&, const ImageGrid<double>&);
template Sinogram<float> forward_project(const FanBeamGeometry&, const ImageGrid<float>&);
template ImageGrid<double> back_project(const FanBeamGeometry&, const Sinogram<double>&);
template ImageGrid<float> back_project(const FanBeamGeometry&, const Sinogram<float>&);
template Sinogram<double> ramp_filter(const Sinogram<double>&, RampWindow);
template Sinogram<float> ramp_filter(const Sinogram<float>&, RampWindow);
template ImageGrid<double> fbp_reconstruct(const FanBeamGeometry&, const Sinogram<double>&,
                                           RampWindow);
template ImageGrid<float> fbp_reconstruct(const FanBeamGeometry&, const Sinogram<float>&,
                                          RampWindow);

}  // namespace pnpmbir
