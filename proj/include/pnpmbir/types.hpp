#pragma once

#include <Eigen/Core>

#include <string>

#include "pnpmbir/errors.hpp"

namespace pnpmbir {

using Index = Eigen::Index;

/// Row-major dense 2-D array; the storage type for every image and sinogram.
template <typename Scalar>
using Array2 = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Array2d = Array2<double>;
using Array2f = Array2<float>;
using Array2i = Array2<int>;

/// Linear attenuation of water at the reference spectrum (1/mm).
inline constexpr double kMuWater = 0.0206;

inline double mu_to_hu(double mu) { return 1000.0 * (mu - kMuWater) / kMuWater; }
inline double hu_to_mu(double hu) { return kMuWater * (1.0 + hu / 1000.0); }

/// Square image of linear attenuation values (1/mm).
template <typename Scalar = double>
struct ImageGrid {
  Array2<Scalar> values;
  double pixel_mm = 1.0;

  ImageGrid() = default;
  ImageGrid(Index side, double pixel)
      : values(Array2<Scalar>::Zero(side, side)), pixel_mm(pixel) {}
  ImageGrid(Array2<Scalar> v, double pixel) : values(std::move(v)), pixel_mm(pixel) {
    if (values.rows() != values.cols()) {
      throw DimensionError("image must be square, got " + std::to_string(values.rows()) +
                           "x" + std::to_string(values.cols()));
    }
  }

  Index side() const { return values.rows(); }
  Index size() const { return values.size(); }
  bool all_finite() const { return values.isFinite().all(); }

  /// Values in Hounsfield units.
  Array2<Scalar> hu() const {
    return (values - Scalar(kMuWater)) * Scalar(1000.0 / kMuWater);
  }
};

/// Line integrals indexed by (view, detector).
template <typename Scalar = double>
struct Sinogram {
  Array2<Scalar> values;

  Sinogram() = default;
  Sinogram(Index n_views, Index n_detectors)
      : values(Array2<Scalar>::Zero(n_views, n_detectors)) {}
  explicit Sinogram(Array2<Scalar> v) : values(std::move(v)) {}

  Index n_views() const { return values.rows(); }
  Index n_detectors() const { return values.cols(); }
  bool all_finite() const { return values.isFinite().all(); }
};

using Image = ImageGrid<double>;
using Sino = Sinogram<double>;

template <typename A, typename B>
void require_same_shape(const A& a, const B& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(std::string(what) + ": shape mismatch " + std::to_string(a.rows()) +
                         "x" + std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) +
                         "x" + std::to_string(b.cols()));
  }
}

}  // namespace pnpmbir
