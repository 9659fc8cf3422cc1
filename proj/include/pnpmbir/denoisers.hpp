#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "pnpmbir/types.hpp"

namespace pnpmbir {

/// Whole-sample symmetric reflection of index i into [0, n): d c b | a b c d | c b a.
inline Index reflect_index(Index i, Index n) {
  if (n == 1) return 0;
  const Index period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

/// Normalized 1-D Gaussian taps of radius ceil(4 sigma).
std::vector<double> gaussian_taps(double sigma);

/// Separable Gaussian blur with reflect padding; sigma == 0 returns the input unchanged.
template <typename Scalar>
Array2<Scalar> gaussian_blur(const Array2<Scalar>& img, double sigma) {
  if (sigma < 0.0) throw UsageError("gaussian sigma must be >= 0");
  if (sigma == 0.0 || img.size() == 0) return img;
  const auto taps = gaussian_taps(sigma);
  const Index radius = Index(taps.size() / 2);
  const Index rows = img.rows();
  const Index cols = img.cols();
  Array2<Scalar> tmp(rows, cols);
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) {
      double acc = 0.0;
      for (Index k = -radius; k <= radius; ++k) {
        acc += taps[k + radius] * double(img(r, reflect_index(c + k, cols)));
      }
      tmp(r, c) = Scalar(acc);
    }
  }
  Array2<Scalar> out(rows, cols);
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) {
      double acc = 0.0;
      for (Index k = -radius; k <= radius; ++k) {
        acc += taps[k + radius] * double(tmp(reflect_index(r + k, rows), c));
      }
      out(r, c) = Scalar(acc);
    }
  }
  return out;
}

/// Isotropic total variation with forward differences and Neumann boundary.
template <typename Scalar>
double total_variation(const Array2<Scalar>& img) {
  const Index rows = img.rows();
  const Index cols = img.cols();
  double tv = 0.0;
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) {
      const double gx = c + 1 < cols ? double(img(r, c + 1) - img(r, c)) : 0.0;
      const double gy = r + 1 < rows ? double(img(r + 1, c) - img(r, c)) : 0.0;
      tv += std::sqrt(gx * gx + gy * gy);
    }
  }
  return tv;
}

inline constexpr int kTvProxIterations = 50;

/// Proximal operator of weight * TV, by Chambolle's dual projection iterations
/// (step 1/4, `iterations` fixed). weight == 0 returns the input unchanged.
template <typename Scalar>
Array2<Scalar> tv_prox(const Array2<Scalar>& img, double weight,
                       int iterations = kTvProxIterations) {
  if (weight < 0.0) throw UsageError("tv weight must be >= 0");
  if (weight == 0.0 || img.size() == 0) return img;
  const Index rows = img.rows();
  const Index cols = img.cols();
  const Array2d f = img.template cast<double>();
  constexpr double tau = 0.25;

  // Forward-difference gradient of f / weight, computed once.
  Array2d fx = Array2d::Zero(rows, cols);
  Array2d fy = Array2d::Zero(rows, cols);
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) {
      if (c + 1 < cols) fx(r, c) = (f(r, c + 1) - f(r, c)) / weight;
      if (r + 1 < rows) fy(r, c) = (f(r + 1, c) - f(r, c)) / weight;
    }
  }

  Array2d px = Array2d::Zero(rows, cols);
  Array2d py = Array2d::Zero(rows, cols);
  Array2d div(rows, cols);
  auto divergence = [&]() {
    for (Index r = 0; r < rows; ++r) {
      for (Index c = 0; c < cols; ++c) {
        double d = 0.0;
        if (c + 1 < cols) d += px(r, c);
        if (c > 0) d -= px(r, c - 1);
        if (r + 1 < rows) d += py(r, c);
        if (r > 0) d -= py(r - 1, c);
        div(r, c) = d;
      }
    }
  };

  for (int it = 0; it < iterations; ++it) {
    divergence();
    for (Index r = 0; r < rows; ++r) {
      for (Index c = 0; c < cols; ++c) {
        const double gx = c + 1 < cols ? (div(r, c + 1) - div(r, c)) - fx(r, c) : 0.0;
        const double gy = r + 1 < rows ? (div(r + 1, c) - div(r, c)) - fy(r, c) : 0.0;
        const double denom = 1.0 + tau * std::sqrt(gx * gx + gy * gy);
        px(r, c) = (px(r, c) + tau * gx) / denom;
        py(r, c) = (py(r, c) + tau * gy) / denom;
      }
    }
  }
  divergence();
  return (f - weight * div).template cast<Scalar>();
}

enum class DenoiserKind { Identity, Gaussian, TvProx, ResidualCnn };

DenoiserKind parse_denoiser_kind(const std::string& name);
std::string to_string(DenoiserKind kind);

struct DenoiserSpec {
  DenoiserKind kind = DenoiserKind::Identity;
  /// Gaussian sd in pixels, TV weight, or CNN noise-level tag (metadata only).
  double strength = 0.0;
  std::optional<std::string> weights_path;

  void validate() const;
};

/// A plug-in prior D_sigma. Implementations are immutable and safe to share across threads.
class Denoiser {
 public:
  virtual ~Denoiser() = default;

  /// Checks finiteness, then delegates to apply().
  Image operator()(const Image& img) const;
  virtual std::string name() const = 0;

 protected:
  virtual Image apply(const Image& img) const = 0;
};

class IdentityDenoiser final : public Denoiser {
 public:
  std::string name() const override { return "identity"; }

 protected:
  Image apply(const Image& img) const override { return img; }
};

class GaussianDenoiser final : public Denoiser {
 public:
  explicit GaussianDenoiser(double sigma);
  std::string name() const override { return "gaussian"; }
  double sigma() const { return sigma_; }

 protected:
  Image apply(const Image& img) const override;

 private:
  double sigma_;
};

class TvProxDenoiser final : public Denoiser {
 public:
  explicit TvProxDenoiser(double weight, int iterations = kTvProxIterations);
  std::string name() const override { return "tv"; }

 protected:
  Image apply(const Image& img) const override;

 private:
  double weight_;
  int iterations_;
};

/// Wraps an arbitrary callable; the caller vouches for its thread safety.
class FunctionDenoiser final : public Denoiser {
 public:
  FunctionDenoiser(std::string name, std::function<Image(const Image&)> fn)
      : name_(std::move(name)), fn_(std::move(fn)) {}
  std::string name() const override { return name_; }

 protected:
  Image apply(const Image& img) const override { return fn_(img); }

 private:
  std::string name_;
  std::function<Image(const Image&)> fn_;
};

/// Builds the denoiser described by `spec`; ResidualCnn loads its weight file.
std::unique_ptr<Denoiser> make_denoiser(const DenoiserSpec& spec);

extern template Array2<double> gaussian_blur(const Array2<double>&, double);
extern template Array2<float> gaussian_blur(const Array2<float>&, double);
extern template Array2<double> tv_prox(const Array2<double>&, double, int);
extern template Array2<float> tv_prox(const Array2<float>&, double, int);

}  // namespace pnpmbir
