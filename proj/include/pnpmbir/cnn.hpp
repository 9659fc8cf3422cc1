#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "pnpmbir/denoisers.hpp"

namespace pnpmbir {

enum class LayerType : std::uint8_t { Conv3x3 = 0, ReLU = 1, AddInputSkip = 2 };

/// One network layer. Only Conv3x3 carries parameters; ReLU and AddInputSkip
/// keep the channel count (out_channels == in_channels) and have empty tensors.
struct CnnLayer {
  LayerType type = LayerType::Conv3x3;
  std::uint32_t out_channels = 1;
  std::uint32_t in_channels = 1;
  /// [out][in][ky][kx], 9 * out * in entries for Conv3x3.
  std::vector<float> kernel;
  std::vector<float> bias;

  float& weight(std::uint32_t o, std::uint32_t i, int ky, int kx) {
    return kernel[((std::size_t(o) * in_channels + i) * 3 + ky) * 3 + kx];
  }
  float weight(std::uint32_t o, std::uint32_t i, int ky, int kx) const {
    return kernel[((std::size_t(o) * in_channels + i) * 3 + ky) * 3 + kx];
  }
};

/// Parameters of the residual CNN prior (PNPW format, version 1).
struct DenoiserWeights {
  static constexpr std::uint32_t kFormatVersion = 1;

  std::uint32_t format_version = kFormatVersion;
  std::vector<CnnLayer> layers;

  std::size_t n_layers() const { return layers.size(); }
  /// Widest channel count across layers.
  std::uint32_t channel_width() const;

  /// Throws FormatError on broken channel chaining, wrong tensor sizes or
  /// non-finite values. Offsets are reported as 0 for in-memory objects.
  void validate() const;
};

/// Serializes to the PNPW byte layout: "PNPW", u32 version, u32 n_layers, then per
/// layer u8 type, u32 out_ch, u32 in_ch, f32 kernel[out][in][3][3], f32 bias[out]
/// (tensors present for Conv3x3 only). Little-endian throughout.
std::vector<std::uint8_t> serialize_weights(const DenoiserWeights& weights);
void save_weights(const DenoiserWeights& weights, const std::filesystem::path& path);

/// Parses and validates PNPW bytes; FormatError carries the failing byte offset.
DenoiserWeights parse_weights(std::span<const std::uint8_t> bytes);
DenoiserWeights load_weights(const std::filesystem::path& path);

/// Residual inference: img + network(img). float32 activations and accumulation,
/// reflect padding on every convolution.
Image cnn_infer(const DenoiserWeights& weights, const Image& img);

/// conv3x3 -> (relu -> conv3x3) * (n_conv - 1) with `width` hidden channels, weights
/// drawn uniformly from [-scale, scale] with a seeded generator and zero biases.
DenoiserWeights make_residual_cnn(int n_conv, std::uint32_t width, std::uint64_t seed,
                                  float scale);

class ResidualCnnDenoiser final : public Denoiser {
 public:
  explicit ResidualCnnDenoiser(DenoiserWeights weights);
  std::string name() const override { return "cnn"; }
  const DenoiserWeights& weights() const { return weights_; }

 protected:
  Image apply(const Image& img) const override { return cnn_infer(weights_, img); }

 private:
  DenoiserWeights weights_;
};

}  // namespace pnpmbir
