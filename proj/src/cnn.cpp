#include "pnpmbir/cnn.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <random>

namespace pnpmbir {

namespace {

constexpr char kMagic[4] = {'P', 'N', 'P', 'W'};
constexpr std::uint32_t kMaxChannels = 4096;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(std::uint8_t((v >> (8 * i)) & 0xFF));
}

void put_f32(std::vector<std::uint8_t>& out, float f) { put_u32(out, std::bit_cast<std::uint32_t>(f)); }

std::string layer_name(LayerType t) {
  switch (t) {
    case LayerType::Conv3x3: return "conv3x3";
    case LayerType::ReLU: return "relu";
    case LayerType::AddInputSkip: return "add_input_skip";
  }
  return "unknown";
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

  bool has(std::size_t n) const { return remaining() >= n; }

  std::uint8_t u8() { return bytes_[pos_++]; }
  std::uint32_t u32() {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

/// Reflect-padded copy with a one-pixel border.
Array2f pad_reflect(const Array2f& x) {
  const Index rows = x.rows();
  const Index cols = x.cols();
  Array2f p(rows + 2, cols + 2);
  for (Index r = -1; r <= rows; ++r) {
    for (Index c = -1; c <= cols; ++c) {
      p(r + 1, c + 1) = x(reflect_index(r, rows), reflect_index(c, cols));
    }
  }
  return p;
}

void check_chain(const std::vector<CnnLayer>& layers, const std::vector<std::size_t>& offsets) {
  auto where = [&](std::size_t k) { return k < offsets.size() ? offsets[k] : 0; };
  if (layers.empty()) throw FormatError("network has no layers", where(0));
  std::uint32_t channels = 1;
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const auto& l = layers[k];
    const std::string tag = "layer " + std::to_string(k) + " (" + layer_name(l.type) + ")";
    if (l.in_channels != channels) {
      throw FormatError(tag + ": expects " + std::to_string(l.in_channels) +
                            " input channels but receives " + std::to_string(channels),
                        where(k));
    }
    if (l.type == LayerType::Conv3x3) {
      if (l.out_channels == 0) throw FormatError(tag + ": zero output channels", where(k));
      if (l.kernel.size() != 9ull * l.out_channels * l.in_channels ||
          l.bias.size() != l.out_channels) {
        throw FormatError(tag + ": tensor sizes do not match channel counts", where(k));
      }
      const auto finite = [](float f) { return std::isfinite(f); };
      if (!std::all_of(l.kernel.begin(), l.kernel.end(), finite) ||
          !std::all_of(l.bias.begin(), l.bias.end(), finite)) {
        throw FormatError(tag + ": non-finite parameter", where(k));
      }
    } else {
      if (l.out_channels != l.in_channels) {
        throw FormatError(tag + ": must preserve channel count", where(k));
      }
      if (!l.kernel.empty() || !l.bias.empty()) {
        throw FormatError(tag + ": carries no parameters", where(k));
      }
    }
    channels = l.out_channels;
  }
  if (channels != 1) {
    throw FormatError("network ends with " + std::to_string(channels) + " channels, expected 1",
                      where(layers.size()));
  }
}

}  // namespace

std::uint32_t DenoiserWeights::channel_width() const {
  std::uint32_t w = 0;
  for (const auto& l : layers) w = std::max({w, l.in_channels, l.out_channels});
  return w;
}

void DenoiserWeights::validate() const {
  if (format_version != kFormatVersion) {
    throw FormatError("unsupported format version " + std::to_string(format_version), 0);
  }
  check_chain(layers, {});
}

std::vector<std::uint8_t> serialize_weights(const DenoiserWeights& weights) {
  weights.validate();
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put_u32(out, weights.format_version);
  put_u32(out, std::uint32_t(weights.layers.size()));
  for (const auto& l : weights.layers) {
    out.push_back(std::uint8_t(l.type));
    put_u32(out, l.out_channels);
    put_u32(out, l.in_channels);
    for (float w : l.kernel) put_f32(out, w);
    for (float b : l.bias) put_f32(out, b);
  }
  return out;
}

void save_weights(const DenoiserWeights& weights, const std::filesystem::path& path) {
  const auto bytes = serialize_weights(weights);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  if (!f) throw IoError("failed writing " + path.string());
}

DenoiserWeights parse_weights(std::span<const std::uint8_t> bytes) {
  Reader in(bytes);
  if (!in.has(4) || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw FormatError("bad magic, expected \"PNPW\"", 0);
  }
  in.u32();
  if (!in.has(8)) throw FormatError("truncated header", in.offset());
  DenoiserWeights w;
  const std::size_t version_at = in.offset();
  w.format_version = in.u32();
  if (w.format_version != DenoiserWeights::kFormatVersion) {
    throw FormatError("unsupported format version " + std::to_string(w.format_version),
                      version_at);
  }
  const std::uint32_t n_layers = in.u32();

  std::vector<std::size_t> offsets;
  for (std::uint32_t k = 0; k < n_layers; ++k) {
    const std::string tag = "layer " + std::to_string(k) + " of " + std::to_string(n_layers);
    offsets.push_back(in.offset());
    if (!in.has(9)) throw FormatError("truncated: missing header of " + tag, in.offset());
    CnnLayer l;
    const std::size_t type_at = in.offset();
    const std::uint8_t type = in.u8();
    if (type > std::uint8_t(LayerType::AddInputSkip)) {
      throw FormatError(tag + ": unknown layer type " + std::to_string(type), type_at);
    }
    l.type = LayerType(type);
    l.out_channels = in.u32();
    l.in_channels = in.u32();
    if (l.out_channels > kMaxChannels || l.in_channels > kMaxChannels) {
      throw FormatError(tag + ": implausible channel count", type_at + 1);
    }
    if (l.type == LayerType::Conv3x3) {
      const std::size_t n_kernel = 9ull * l.out_channels * l.in_channels;
      const std::size_t need = 4 * (n_kernel + l.out_channels);
      if (!in.has(need)) {
        throw FormatError("truncated: " + tag + " needs " + std::to_string(need) +
                              " parameter bytes, " + std::to_string(in.remaining()) + " remain",
                          in.offset());
      }
      l.kernel.resize(n_kernel);
      l.bias.resize(l.out_channels);
      for (auto* v : {&l.kernel, &l.bias}) {
        for (auto& x : *v) {
          const std::size_t at = in.offset();
          x = in.f32();
          if (!std::isfinite(x)) throw FormatError(tag + ": non-finite parameter", at);
        }
      }
    }
    w.layers.push_back(std::move(l));
  }
  if (in.remaining() != 0) {
    throw FormatError(std::to_string(in.remaining()) + " trailing bytes after last layer",
                      in.offset());
  }
  check_chain(w.layers, offsets);
  return w;
}

DenoiserWeights load_weights(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open weights file " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());
  return parse_weights(bytes);
}

Image cnn_infer(const DenoiserWeights& weights, const Image& img) {
  weights.validate();
  const Index rows = img.values.rows();
  const Index cols = img.values.cols();
  const Array2f input = img.values.cast<float>();
  std::vector<Array2f> act{input};

  for (const auto& l : weights.layers) {
    switch (l.type) {
      case LayerType::Conv3x3: {
        std::vector<Array2f> padded;
        padded.reserve(act.size());
        for (const auto& a : act) padded.push_back(pad_reflect(a));
        std::vector<Array2f> next(l.out_channels);
        for (std::uint32_t o = 0; o < l.out_channels; ++o) {
          Array2f acc = Array2f::Constant(rows, cols, l.bias[o]);
          for (std::uint32_t i = 0; i < l.in_channels; ++i) {
            for (int ky = 0; ky < 3; ++ky) {
              for (int kx = 0; kx < 3; ++kx) {
                acc += l.weight(o, i, ky, kx) * padded[i].block(ky, kx, rows, cols);
              }
            }
          }
          next[o] = std::move(acc);
        }
        act = std::move(next);
        break;
      }
      case LayerType::ReLU:
        for (auto& a : act) a = a.max(0.0f);
        break;
      case LayerType::AddInputSkip:
        for (auto& a : act) a += input;
        break;
    }
  }
  return Image(img.values + act.front().cast<double>(), img.pixel_mm);
}

DenoiserWeights make_residual_cnn(int n_conv, std::uint32_t width, std::uint64_t seed,
                                  float scale) {
  if (n_conv < 1) throw UsageError("network needs at least one conv layer");
  if (width < 1) throw UsageError("network width must be >= 1");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> uni(-scale, scale);
  DenoiserWeights w;
  std::uint32_t channels = 1;
  for (int k = 0; k < n_conv; ++k) {
    const std::uint32_t out = k + 1 == n_conv ? 1 : width;
    CnnLayer conv;
    conv.type = LayerType::Conv3x3;
    conv.in_channels = channels;
    conv.out_channels = out;
    conv.kernel.resize(9ull * out * channels);
    for (auto& x : conv.kernel) x = uni(rng);
    conv.bias.assign(out, 0.0f);
    w.layers.push_back(std::move(conv));
    channels = out;
    if (k + 1 < n_conv) {
      w.layers.push_back({LayerType::ReLU, channels, channels, {}, {}});
    }
  }
  return w;
}

ResidualCnnDenoiser::ResidualCnnDenoiser(DenoiserWeights weights) : weights_(std::move(weights)) {
  weights_.validate();
}

}  // namespace pnpmbir
