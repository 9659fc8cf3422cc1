#include "pnpmbir/denoisers.hpp"

#include "pnpmbir/cnn.hpp"

namespace pnpmbir {

std::vector<double> gaussian_taps(double sigma) {
  const Index radius = Index(std::ceil(4.0 * sigma));
  std::vector<double> taps(2 * radius + 1);
  double sum = 0.0;
  for (Index k = -radius; k <= radius; ++k) {
    const double w = std::exp(-0.5 * double(k * k) / (sigma * sigma));
    taps[k + radius] = w;
    sum += w;
  }
  for (auto& w : taps) w /= sum;
  return taps;
}

DenoiserKind parse_denoiser_kind(const std::string& name) {
  if (name == "identity") return DenoiserKind::Identity;
  if (name == "gaussian") return DenoiserKind::Gaussian;
  if (name == "tv") return DenoiserKind::TvProx;
  if (name == "cnn") return DenoiserKind::ResidualCnn;
  throw UsageError("unknown denoiser '" + name + "' (expected identity, gaussian, tv or cnn)");
}

std::string to_string(DenoiserKind kind) {
  switch (kind) {
    case DenoiserKind::Identity: return "identity";
    case DenoiserKind::Gaussian: return "gaussian";
    case DenoiserKind::TvProx: return "tv";
    case DenoiserKind::ResidualCnn: return "cnn";
  }
  return "unknown";
}

void DenoiserSpec::validate() const {
  if (!(strength >= 0.0)) throw UsageError("denoiser strength must be >= 0");
  if (kind == DenoiserKind::ResidualCnn && (!weights_path || weights_path->empty())) {
    throw UsageError("cnn denoiser requires a weights path");
  }
}

Image Denoiser::operator()(const Image& img) const {
  if (!img.all_finite()) throw InputError(name() + " denoiser: input contains non-finite values");
  return apply(img);
}

GaussianDenoiser::GaussianDenoiser(double sigma) : sigma_(sigma) {
  if (!(sigma >= 0.0)) throw UsageError("gaussian sigma must be >= 0");
}

Image GaussianDenoiser::apply(const Image& img) const {
  return Image(gaussian_blur(img.values, sigma_), img.pixel_mm);
}

TvProxDenoiser::TvProxDenoiser(double weight, int iterations)
    : weight_(weight), iterations_(iterations) {
  if (!(weight >= 0.0)) throw UsageError("tv weight must be >= 0");
  if (iterations < 0) throw UsageError("tv iterations must be >= 0");
}

Image TvProxDenoiser::apply(const Image& img) const {
  return Image(tv_prox(img.values, weight_, iterations_), img.pixel_mm);
}

std::unique_ptr<Denoiser> make_denoiser(const DenoiserSpec& spec) {
  spec.validate();
  switch (spec.kind) {
    case DenoiserKind::Identity: return std::make_unique<IdentityDenoiser>();
    case DenoiserKind::Gaussian: return std::make_unique<GaussianDenoiser>(spec.strength);
    case DenoiserKind::TvProx: return std::make_unique<TvProxDenoiser>(spec.strength);
    case DenoiserKind::ResidualCnn:
      return std::make_unique<ResidualCnnDenoiser>(load_weights(*spec.weights_path));
  }
  throw UsageError("unknown denoiser kind");
}

template Array2<double> gaussian_blur(const Array2<double>&, double);
template Array2<float> gaussian_blur(const Array2<float>&, double);
template Array2<double> tv_prox(const Array2<double>&, double, int);
template Array2<float> tv_prox(const Array2<float>&, double, int);

}  // namespace pnpmbir
