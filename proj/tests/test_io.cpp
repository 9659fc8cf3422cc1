#include <filesystem>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "pnpmbir/io.hpp"

using namespace pnpmbir;
namespace fs = std::filesystem;

TEST_SUITE("io") {

TEST_CASE("array container layout and round trip") {
  NdArray a;
  a.dims = {2, 3};
  a.data = {1.0, -2.5, 3.0, 0.0, 1e-300, 42.0};
  const auto bytes = encode_array(a);
  CHECK(bytes.size() == 16 + 4 + 8 + 48);
  CHECK(std::string(reinterpret_cast<const char*>(bytes.data()), 13) == "PNPMBIR-ARRAY");
  CHECK(bytes[13] == 0);
  CHECK(bytes[16] == 2);
  CHECK(bytes[20] == 2);
  CHECK(bytes[24] == 3);
  const auto back = decode_array(bytes);
  CHECK(back.dims == a.dims);
  CHECK(back.data == a.data);
}

TEST_CASE("array container rejects damage") {
  NdArray a;
  a.dims = {4};
  a.data = {1, 2, 3, 4};
  auto bytes = encode_array(a);
  auto bad = bytes;
  bad[3] = 'x';
  CHECK_THROWS_AS(decode_array(bad), FormatError);
  bad = bytes;
  bad.pop_back();
  CHECK_THROWS_AS(decode_array(bad), FormatError);
  a.dims = {5};
  CHECK_THROWS_AS(encode_array(a), DimensionError);
}

TEST_CASE("rank-2 files and metadata") {
  const fs::path dir = fs::temp_directory_path() / "pnpmbir_io_test";
  fs::remove_all(dir);
  std::mt19937_64 rng(51);
  const Array2d x = oracle::random_array(5, 7, rng);
  write_array2(dir / "x.pnpa", x);
  CHECK((read_array2(dir / "x.pnpa") == x).all());

  DoseSettings d;
  d.tube_current_mA = 40.0;
  const NoiseRealization r{Array2d::Zero(1, 1), 123456789};
  write_metadata(dir / "c.meta", realization_metadata(r, d));
  const auto meta = read_metadata(dir / "c.meta");
  CHECK(meta.at("seed") == "123456789");
  const auto back = dose_from_metadata(meta);
  CHECK(back.tube_current_mA == d.tube_current_mA);
  CHECK(back.photons_per_ray_at_reference == d.photons_per_ray_at_reference);
  CHECK(back.electronic_noise_sd == d.electronic_noise_sd);

  const std::string data = "abc";
  write_new_file(dir / "once.txt", std::span(reinterpret_cast<const std::uint8_t*>(data.data()), 3));
  CHECK_THROWS_AS(
      write_new_file(dir / "once.txt", std::span(reinterpret_cast<const std::uint8_t*>(data.data()), 3)),
      IoError);
  fs::remove_all(dir);
}

TEST_CASE("sha256 of a known string") {
  const std::string abc = "abc";
  CHECK(sha256_hex(std::span(reinterpret_cast<const std::uint8_t*>(abc.data()), abc.size())) ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("png output is a valid file") {
  const fs::path p = fs::temp_directory_path() / "pnpmbir_test.png";
  fs::remove(p);
  const Array2d img = Eigen::ArrayXd::LinSpaced(16, -200.0, 300.0).reshaped<Eigen::RowMajor>(4, 4);
  write_png(p, img, default_hu_window());
  const auto bytes = read_file(p);
  REQUIRE(bytes.size() > 8);
  CHECK(bytes[1] == 'P');
  CHECK(bytes[2] == 'N');
  CHECK(bytes[3] == 'G');
  fs::remove(p);
}

}
