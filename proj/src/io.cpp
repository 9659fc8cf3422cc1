#include "pnpmbir/io.hpp"

#include <openssl/evp.h>
#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <iterator>
#include <memory>
#include <sstream>

namespace pnpmbir {

namespace {

constexpr char kArrayMagic[16] = {'P', 'N', 'P', 'M', 'B', 'I', 'R', '-',
                                  'A', 'R', 'R', 'A', 'Y', '\0', '\0', '\0'};
constexpr std::uint32_t kMaxRank = 8;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(std::uint8_t((v >> (8 * i)) & 0xFF));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(std::uint8_t((v >> (8 * i)) & 0xFF));
}

std::uint32_t get_u32(std::span<const std::uint8_t> b, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::uint32_t(b[at + i]) << (8 * i);
  return v;
}

std::uint64_t get_u64(std::span<const std::uint8_t> b, std::size_t at) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= std::uint64_t(b[at + i]) << (8 * i);
  return v;
}

std::string format_double(double v) {
  std::ostringstream s;
  s << std::setprecision(17) << v;
  return s.str();
}

double parse_double(const std::map<std::string, std::string>& meta, const std::string& key) {
  const auto it = meta.find(key);
  if (it == meta.end()) throw FormatError("metadata is missing key '" + key + "'", 0);
  try {
    return std::stod(it->second);
  } catch (const std::exception&) {
    throw FormatError("metadata key '" + key + "' is not a number", 0);
  }
}

}  // namespace

std::vector<std::uint8_t> encode_array(const NdArray& array) {
  std::size_t count = 1;
  for (auto d : array.dims) count *= d;
  if (count != array.data.size()) {
    throw DimensionError("array dims describe " + std::to_string(count) + " values but " +
                         std::to_string(array.data.size()) + " are present");
  }
  std::vector<std::uint8_t> out(std::begin(kArrayMagic), std::end(kArrayMagic));
  put_u32(out, std::uint32_t(array.dims.size()));
  for (auto d : array.dims) put_u32(out, d);
  out.reserve(out.size() + 8 * count);
  for (double v : array.data) put_u64(out, std::bit_cast<std::uint64_t>(v));
  return out;
}

NdArray decode_array(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kArrayMagic, 16) != 0) {
    throw FormatError("bad array magic", 0);
  }
  if (bytes.size() < 20) throw FormatError("truncated array header", bytes.size());
  const std::uint32_t rank = get_u32(bytes, 16);
  if (rank > kMaxRank) throw FormatError("implausible array rank " + std::to_string(rank), 16);
  std::size_t at = 20;
  if (bytes.size() < at + 4 * std::size_t(rank)) throw FormatError("truncated dims", bytes.size());
  NdArray a;
  std::size_t count = 1;
  for (std::uint32_t k = 0; k < rank; ++k) {
    a.dims.push_back(get_u32(bytes, at));
    count *= a.dims.back();
    at += 4;
  }
  if (bytes.size() - at != 8 * count) {
    throw FormatError("expected " + std::to_string(8 * count) + " data bytes, found " +
                          std::to_string(bytes.size() - at),
                      at);
  }
  a.data.resize(count);
  for (std::size_t i = 0; i < count; ++i, at += 8) {
    a.data[i] = std::bit_cast<double>(get_u64(bytes, at));
  }
  return a;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

namespace {

void write_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create directory " + path.parent_path().string());
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  if (!f) throw IoError("failed writing " + path.string());
}

}  // namespace

void write_new_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  if (std::filesystem::exists(path)) {
    throw IoError("refusing to overwrite existing file " + path.string());
  }
  write_bytes(path, bytes);
}

void write_array(const std::filesystem::path& path, const NdArray& array) {
  write_bytes(path, encode_array(array));
}

NdArray read_array(const std::filesystem::path& path) { return decode_array(read_file(path)); }

void write_array2(const std::filesystem::path& path, const Array2d& values) {
  NdArray a;
  a.dims = {std::uint32_t(values.rows()), std::uint32_t(values.cols())};
  a.data.assign(values.data(), values.data() + values.size());
  write_array(path, a);
}

Array2d read_array2(const std::filesystem::path& path) {
  const NdArray a = read_array(path);
  if (a.dims.size() != 2) {
    throw DimensionError(path.string() + ": expected a rank-2 array, got rank " +
                         std::to_string(a.dims.size()));
  }
  Array2d out(a.dims[0], a.dims[1]);
  std::copy(a.data.begin(), a.data.end(), out.data());
  return out;
}

void write_metadata(const std::filesystem::path& path,
                    const std::map<std::string, std::string>& entries) {
  std::string text;
  for (const auto& [k, v] : entries) text += k + "=" + v + "\n";
  write_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::map<std::string, std::string> read_metadata(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open " + path.string());
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t offset = 0;
  while (std::getline(f, line)) {
    if (!line.empty()) {
      const auto eq = line.find('=');
      if (eq == std::string::npos || eq == 0) {
        throw FormatError(path.string() + ": malformed metadata line '" + line + "'", offset);
      }
      out[line.substr(0, eq)] = line.substr(eq + 1);
    }
    offset += line.size() + 1;
  }
  return out;
}

std::map<std::string, std::string> realization_metadata(const NoiseRealization& r,
                                                        const DoseSettings& dose) {
  return {
      {"seed", std::to_string(r.seed)},
      {"mA", format_double(dose.tube_current_mA)},
      {"reference_mA", format_double(dose.reference_current_mA)},
      {"I0_ref", format_double(dose.photons_per_ray_at_reference)},
      {"sd", format_double(dose.electronic_noise_sd)},
      {"kVp", format_double(dose.kvp_label)},
  };
}

DoseSettings dose_from_metadata(const std::map<std::string, std::string>& meta) {
  DoseSettings d;
  d.tube_current_mA = parse_double(meta, "mA");
  d.reference_current_mA = parse_double(meta, "reference_mA");
  d.photons_per_ray_at_reference = parse_double(meta, "I0_ref");
  d.electronic_noise_sd = parse_double(meta, "sd");
  if (meta.count("kVp")) d.kvp_label = parse_double(meta, "kVp");
  return d;
}

void write_png(const std::filesystem::path& path, const Array2d& values, Window window) {
  if (!(window.lo < window.hi)) throw UsageError("png window needs lo < hi");
  const int rows = int(values.rows());
  const int cols = int(values.cols());
  std::vector<std::uint8_t> pixels(std::size_t(rows) * cols);
  for (Index i = 0; i < values.size(); ++i) {
    const double t = (values.data()[i] - window.lo) / (window.hi - window.lo);
    const double v = std::isfinite(t) ? std::clamp(t, 0.0, 1.0) : 0.0;
    pixels[i] = std::uint8_t(std::lround(255.0 * v));
  }

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.c_str(), "wb"), &std::fclose);
  if (!fp) throw IoError("cannot open " + path.string() + " for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw IoError("libpng initialization failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("libpng failed writing " + path.string());
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, png_uint_32(cols), png_uint_32(rows), 8, PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int r = 0; r < rows; ++r) png_write_row(png, pixels.data() + std::size_t(r) * cols);
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

std::string sha256_hex(std::span<const std::uint8_t> bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw IoError("sha256 computation failed");
  }
  std::ostringstream out;
  for (unsigned int i = 0; i < len; ++i) {
    out << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  }
  return out.str();
}

std::string sha256_file(const std::filesystem::path& path) { return sha256_hex(read_file(path)); }

}  // namespace pnpmbir
