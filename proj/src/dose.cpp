#include "pnpmbir/dose.hpp"

#include <cmath>
#include <random>

namespace pnpmbir {

void DoseSettings::validate() const {
  if (!(tube_current_mA > 0.0)) throw UsageError("tube_current_mA must be positive");
  if (!(reference_current_mA > 0.0)) throw UsageError("reference_current_mA must be positive");
  if (!(photons_per_ray_at_reference > 0.0)) {
    throw UsageError("photons_per_ray_at_reference must be positive");
  }
  if (!(electronic_noise_sd >= 0.0)) throw UsageError("electronic_noise_sd must be >= 0");
}

std::uint64_t ray_stream_key(std::uint64_t seed, Index view, Index detector) {
  SplitMix64 mix(seed);
  const std::uint64_t salt = mix();
  SplitMix64 ray((std::uint64_t(view) << 32) ^ std::uint64_t(detector) ^ salt);
  return ray();
}

NoiseRealization sample_counts(const Sino& line_integrals, const DoseSettings& dose,
                               std::uint64_t seed) {
  dose.validate();
  if (!line_integrals.all_finite()) throw InputError("line integrals must be finite");
  const double i0 = dose.incident_photons();
  NoiseRealization out;
  out.seed = seed;
  out.counts.resize(line_integrals.n_views(), line_integrals.n_detectors());
  for (Index v = 0; v < line_integrals.n_views(); ++v) {
    for (Index d = 0; d < line_integrals.n_detectors(); ++d) {
      SplitMix64 rng(ray_stream_key(seed, v, d));
      const double mean = i0 * std::exp(-line_integrals.values(v, d));
      double c = 0.0;
      if (mean > 0.0) {
        std::poisson_distribution<long long> poisson(mean);
        c = double(poisson(rng));
      }
      if (dose.electronic_noise_sd > 0.0) {
        std::normal_distribution<double> gauss(0.0, dose.electronic_noise_sd);
        c += gauss(rng);
      }
      out.counts(v, d) = c > 0.0 ? c : 0.0;
    }
  }
  return out;
}

NoiseRealization simulate_counts(const FanBeamGeometry& geom, const Image& phantom,
                                 const DoseSettings& dose, std::uint64_t seed) {
  return sample_counts(forward_project(geom, phantom), dose, seed);
}

Sino counts_to_sinogram(const NoiseRealization& realization, const DoseSettings& dose) {
  dose.validate();
  const double i0 = dose.incident_photons();
  return Sino((-(realization.counts.max(kCountFloor) / i0).log()).eval());
}

Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> starved_rays(
    const NoiseRealization& realization) {
  return realization.counts < kCountFloor;
}

Array2d raw_statistical_weights(const NoiseRealization& realization, const DoseSettings& dose) {
  const double var_e = dose.electronic_noise_sd * dose.electronic_noise_sd;
  const Array2d& c = realization.counts;
  return (c < kCountFloor).select(0.0, c.square() / (c + var_e));
}

StatWeights statistical_weights(const NoiseRealization& realization, const DoseSettings& dose) {
  Array2d w = raw_statistical_weights(realization, dose);
  const double peak = w.size() > 0 ? w.maxCoeff() : 0.0;
  if (peak > 0.0) w /= peak;
  return {std::move(w)};
}

}  // namespace pnpmbir
