#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "pnpmbir/dose.hpp"
#include "pnpmbir/metrics.hpp"

namespace pnpmbir {

/// Dense array of any rank as stored in the container format.
struct NdArray {
  std::vector<std::uint32_t> dims;
  std::vector<double> data;  // row-major
};

/// Flat binary container: 16-byte magic "PNPMBIR-ARRAY\0\0\0", u32 rank, u32 dims[rank],
/// then little-endian float64 data in row-major order.
std::vector<std::uint8_t> encode_array(const NdArray& array);
NdArray decode_array(std::span<const std::uint8_t> bytes);

void write_array(const std::filesystem::path& path, const NdArray& array);
NdArray read_array(const std::filesystem::path& path);

/// Rank-2 convenience wrappers.
void write_array2(const std::filesystem::path& path, const Array2d& values);
Array2d read_array2(const std::filesystem::path& path);

/// key=value text, one pair per line, keys sorted.
void write_metadata(const std::filesystem::path& path,
                    const std::map<std::string, std::string>& entries);
std::map<std::string, std::string> read_metadata(const std::filesystem::path& path);

/// Sidecar for a noise realization: seed, mA, reference mA, I0_ref, sd, kVp label.
std::map<std::string, std::string> realization_metadata(const NoiseRealization& r,
                                                        const DoseSettings& dose);
DoseSettings dose_from_metadata(const std::map<std::string, std::string>& meta);

/// 8-bit grayscale PNG of `values` mapped linearly from `window` to [0, 255].
void write_png(const std::filesystem::path& path, const Array2d& values, Window window);

/// Lower-case hex SHA-256.
std::string sha256_hex(std::span<const std::uint8_t> bytes);
std::string sha256_file(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
/// Refuses to overwrite an existing file.
void write_new_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace pnpmbir
