#pragma once

#include <cstdint>
#include <limits>
#include <string>

#include "pnpmbir/geometry.hpp"

namespace pnpmbir {

/// Tube-current driven photon budget. kVp is carried as a label only.
struct DoseSettings {
  double tube_current_mA = 40.0;
  double reference_current_mA = 800.0;
  double photons_per_ray_at_reference = 2.0e5;
  double electronic_noise_sd = 5.0;
  double kvp_label = 120.0;

  /// Incident photons per ray, I0 = I0_ref * mA / mA_ref.
  double incident_photons() const {
    return photons_per_ray_at_reference * (tube_current_mA / reference_current_mA);
  }
  void validate() const;
};

/// Detector counts of one simulated acquisition.
struct NoiseRealization {
  Array2d counts;
  std::uint64_t seed = 0;
};

/// Diagonal of the statistical weight matrix W, normalized so the largest entry is 1.
struct StatWeights {
  Array2d values;
};

/// Counts below this floor are treated as photon-starved.
inline constexpr double kCountFloor = 1.0;

/// Minimal counter-based generator: SplitMix64 over a 64-bit state.
/// Satisfies UniformRandomBitGenerator.
class SplitMix64 {
 public:
  using result_type = std::uint64_t;
  explicit SplitMix64(std::uint64_t state) : state_(state) {}
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t state_;
};

/// Stream key for ray (view, detector) of a realization seeded with `seed`.
std::uint64_t ray_stream_key(std::uint64_t seed, Index view, Index detector);

/// Poisson(I0 exp(-l)) + N(0, sd^2) per ray, clamped at 0. Each ray draws from its
/// own counter-keyed stream, so results do not depend on traversal order.
NoiseRealization sample_counts(const Sino& line_integrals, const DoseSettings& dose,
                               std::uint64_t seed);

/// forward_project followed by sample_counts.
NoiseRealization simulate_counts(const FanBeamGeometry& geom, const Image& phantom,
                                 const DoseSettings& dose, std::uint64_t seed);

/// Post-log sinogram y = -ln(max(c, 1) / I0).
Sino counts_to_sinogram(const NoiseRealization& realization, const DoseSettings& dose);

/// Mask of rays whose counts fall below the floor.
Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> starved_rays(
    const NoiseRealization& realization);

/// Unnormalized delta-method precision c^2 / (c + sd^2), zero on starved rays.
Array2d raw_statistical_weights(const NoiseRealization& realization, const DoseSettings& dose);

/// raw_statistical_weights scaled so the maximum is 1 (all-zero stays all-zero).
StatWeights statistical_weights(const NoiseRealization& realization, const DoseSettings& dose);

}  // namespace pnpmbir
