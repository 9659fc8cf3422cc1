#pragma once

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "pnpmbir/types.hpp"

namespace pnpmbir {

/// Single-row fan-beam scan on a curved equiangular detector, full 2*pi rotation.
///
/// Image pixel (row, col) has its center at x = (col - c) * pixel_mm,
/// y = (c - row) * pixel_mm with c = (image_n - 1) / 2. The source for view k
/// sits at angle 2*pi*k/n_views on a circle of radius source_to_iso_mm;
/// detector column d sees the ray rotated by (d - (n_detectors - 1) / 2) *
/// detector_pitch_mm / source_to_detector_mm from the central ray.
struct FanBeamGeometry {
  int n_views = 360;
  int n_detectors = 256;
  double source_to_iso_mm = 540.0;
  double source_to_detector_mm = 950.0;
  double detector_pitch_mm = 1.0;
  int image_n = 128;
  double pixel_mm = 1.0;

  /// Throws UsageError naming the first violated constraint.
  void validate() const;

  /// Fan angle between adjacent detector columns (radians).
  double angular_pitch() const { return detector_pitch_mm / source_to_detector_mm; }
  /// Fan angle of the outermost detector center.
  double half_fan_angle() const { return 0.5 * (n_detectors - 1) * angular_pitch(); }
  double view_angle(Index view) const {
    return 2.0 * std::numbers::pi * double(view) / double(n_views);
  }
  double detector_angle(Index det) const {
    return (double(det) - 0.5 * (n_detectors - 1)) * angular_pitch();
  }
  /// Radius of the inscribed reconstruction circle (mm).
  double fov_radius_mm() const { return 0.5 * image_n * pixel_mm; }

  Index n_rays() const { return Index(n_views) * n_detectors; }
  Index n_pixels() const { return Index(image_n) * image_n; }
};

/// Geometry used when nothing else is configured.
inline FanBeamGeometry default_geometry() { return {}; }

enum class RampWindow { RamLak, Hann };

RampWindow parse_ramp_window(const std::string& name);
std::string to_string(RampWindow window);

/// Ramp-filter taps h[-half..half] for sample spacing `spacing`, apodized by `window`.
/// Ram-Lak: h[0] = 1/(4 s^2), h[odd k] = -1/(pi^2 k^2 s^2), h[even k] = 0.
/// Hann: 0.5 h[k] + 0.25 (h[k-1] + h[k+1]).
std::vector<double> ramp_kernel_taps(Index half, RampWindow window, double spacing = 1.0);

/// Applies the system matrix A: Joseph line integrals along every source-detector ray.
template <typename Scalar>
Sinogram<Scalar> forward_project(const FanBeamGeometry& geom, const ImageGrid<Scalar>& img);

/// Applies A^T: the exact transpose of forward_project's interpolation weights.
template <typename Scalar>
ImageGrid<Scalar> back_project(const FanBeamGeometry& geom, const Sinogram<Scalar>& sino);

/// Ramp-filters each view row by circular convolution over the row length with the
/// periodized discrete kernel (frequency response |f| * window, zero at DC).
/// Detector pitch is normalized to 1.
template <typename Scalar>
Sinogram<Scalar> ramp_filter(const Sinogram<Scalar>& sino, RampWindow window);

/// Equiangular fan-beam filtered backprojection.
template <typename Scalar>
ImageGrid<Scalar> fbp_reconstruct(const FanBeamGeometry& geom, const Sinogram<Scalar>& sino,
                                  RampWindow window = RampWindow::Hann);

namespace detail {

void check_image(const FanBeamGeometry& geom, Index rows, Index cols);
void check_sinogram(const FanBeamGeometry& geom, Index rows, Index cols);

/// One ray, resolved for Joseph traversal along its dominant image axis.
struct JosephRay {
  bool x_major;     // step over columns when true, rows otherwise
  double origin;    // minor-axis continuous index at major index 0
  double slope;     // minor-axis index increment per major step
  double weight;    // path length per major step (mm)
};

JosephRay make_joseph_ray(const FanBeamGeometry& geom, Index view, Index det);

}  // namespace detail

template <typename Scalar>
Sinogram<Scalar> forward_project(const FanBeamGeometry& geom, const ImageGrid<Scalar>& img) {
  geom.validate();
  detail::check_image(geom, img.values.rows(), img.values.cols());
  const Index n = geom.image_n;
  Sinogram<Scalar> out(geom.n_views, geom.n_detectors);
  const Scalar* f = img.values.data();
  for (Index view = 0; view < geom.n_views; ++view) {
    for (Index det = 0; det < geom.n_detectors; ++det) {
      const auto ray = detail::make_joseph_ray(geom, view, det);
      // Row-major: pixel (r, c) at r * n + c.
      const Index major_stride = ray.x_major ? 1 : n;
      const Index minor_stride = ray.x_major ? n : 1;
      double acc = 0.0;
      for (Index k = 0; k < n; ++k) {
        const double pos = ray.origin + ray.slope * double(k);
        const double fl = std::floor(pos);
        const Index i0 = Index(fl);
        const double w1 = pos - fl;
        if (i0 >= 0 && i0 < n) {
          acc += (1.0 - w1) * double(f[k * major_stride + i0 * minor_stride]);
        }
        if (i0 + 1 >= 0 && i0 + 1 < n) {
          acc += w1 * double(f[k * major_stride + (i0 + 1) * minor_stride]);
        }
      }
      out.values(view, det) = Scalar(acc * ray.weight);
    }
  }
  return out;
}

template <typename Scalar>
ImageGrid<Scalar> back_project(const FanBeamGeometry& geom, const Sinogram<Scalar>& sino) {
  geom.validate();
  detail::check_sinogram(geom, sino.values.rows(), sino.values.cols());
  const Index n = geom.image_n;
  Array2d acc = Array2d::Zero(n, n);
  double* f = acc.data();
  for (Index view = 0; view < geom.n_views; ++view) {
    for (Index det = 0; det < geom.n_detectors; ++det) {
      const double s = double(sino.values(view, det));
      if (s == 0.0) continue;
      const auto ray = detail::make_joseph_ray(geom, view, det);
      const double ws = s * ray.weight;
      const Index major_stride = ray.x_major ? 1 : n;
      const Index minor_stride = ray.x_major ? n : 1;
      for (Index k = 0; k < n; ++k) {
        const double pos = ray.origin + ray.slope * double(k);
        const double fl = std::floor(pos);
        const Index i0 = Index(fl);
        const double w1 = pos - fl;
        if (i0 >= 0 && i0 < n) f[k * major_stride + i0 * minor_stride] += (1.0 - w1) * ws;
        if (i0 + 1 >= 0 && i0 + 1 < n) f[k * major_stride + (i0 + 1) * minor_stride] += w1 * ws;
      }
    }
  }
  return ImageGrid<Scalar>(acc.cast<Scalar>(), geom.pixel_mm);
}

extern template Sinogram<double> forward_project(const FanBeamGeometry&, const ImageGrid<double>&);
extern template Sinogram<float> forward_project(const FanBeamGeometry&, const ImageGrid<float>&);
extern template ImageGrid<double> back_project(const FanBeamGeometry&, const Sinogram<double>&);
extern template ImageGrid<float> back_project(const FanBeamGeometry&, const Sinogram<float>&);
extern template Sinogram<double> ramp_filter(const Sinogram<double>&, RampWindow);
extern template Sinogram<float> ramp_filter(const Sinogram<float>&, RampWindow);
extern template ImageGrid<double> fbp_reconstruct(const FanBeamGeometry&, const Sinogram<double>&,
                                                  RampWindow);
extern template ImageGrid<float> fbp_reconstruct(const FanBeamGeometry&, const Sinogram<float>&,
                                                 RampWindow);

}  // namespace pnpmbir
