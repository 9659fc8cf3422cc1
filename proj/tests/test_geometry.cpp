#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "pnpmbir/geometry.hpp"
#include "pnpmbir/phantom.hpp"

using namespace pnpmbir;

TEST_SUITE("geometry") {

TEST_CASE("geometry validation rejects impossible scans") {
  FanBeamGeometry g;
  CHECK_NOTHROW(g.validate());
  auto bad = g;
  bad.source_to_detector_mm = bad.source_to_iso_mm;
  CHECK_THROWS_AS(bad.validate(), UsageError);
  bad = g;
  bad.source_to_iso_mm = 80.0;  // inside the image support
  bad.source_to_detector_mm = 200.0;
  CHECK_THROWS_AS(bad.validate(), UsageError);
  bad = g;
  bad.n_detectors = 16;  // fan too narrow for the image
  CHECK_THROWS_AS(bad.validate(), UsageError);
  bad = g;
  bad.n_views = 0;
  CHECK_THROWS_AS(bad.validate(), UsageError);
}

TEST_CASE("forward projection of zero and scaled images") {
  const auto g = oracle::small_geometry(16);
  const Image zero(16, 1.0);
  CHECK((forward_project(g, zero).values == 0.0).all());

  std::mt19937_64 rng(3);
  const Image img(oracle::random_array(16, 16, rng), 1.0);
  const Image twice((2.0 * img.values).eval(), 1.0);
  const auto a = forward_project(g, img);
  const auto b = forward_project(g, twice);
  CHECK(((b.values - 2.0 * a.values).abs() <= 1e-14 * a.values.abs().maxCoeff()).all());
}

TEST_CASE("linearity of A and its adjoint") {
  const auto g = oracle::small_geometry(16);
  std::mt19937_64 rng(4);
  const Image x1(oracle::random_array(16, 16, rng), 1.0);
  const Image x2(oracle::random_array(16, 16, rng), 1.0);
  const Image sum((x1.values + x2.values).eval(), 1.0);
  const auto lhs = forward_project(g, sum).values;
  const auto rhs = (forward_project(g, x1).values + forward_project(g, x2).values).eval();
  CHECK((lhs - rhs).abs().maxCoeff() <= 1e-12 * rhs.abs().maxCoeff());

  const Sino y1(oracle::random_array(g.n_views, g.n_detectors, rng));
  const Sino y2(oracle::random_array(g.n_views, g.n_detectors, rng));
  const Sino ysum((y1.values + y2.values).eval());
  const auto bl = back_project(g, ysum).values;
  const auto br = (back_project(g, y1).values + back_project(g, y2).values).eval();
  CHECK((bl - br).abs().maxCoeff() <= 1e-12 * br.abs().maxCoeff());
}

TEST_CASE("adjoint identity at image_n 32") {
  const auto g = oracle::small_geometry(32);
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const Image x(oracle::random_array(32, 32, rng), 1.0);
    const Sino y(oracle::random_array(g.n_views, g.n_detectors, rng));
    const auto ax = forward_project(g, x);
    const auto aty = back_project(g, y);
    const double lhs = (ax.values * y.values).sum();
    const double rhs = (x.values * aty.values).sum();
    const double scale = std::sqrt((ax.values.square().sum()) * y.values.square().sum());
    CHECK(std::abs(lhs - rhs) / scale < 1e-6);
  }
}

TEST_CASE("back projection equals the transpose of the assembled matrix") {
  const auto g = oracle::small_geometry(8);
  const Eigen::MatrixXd a = oracle::dense_system_matrix(g);
  std::mt19937_64 rng(6);
  const Sino y(oracle::random_array(g.n_views, g.n_detectors, rng));
  const Eigen::VectorXd expect =
      a.transpose() * Eigen::Map<const Eigen::VectorXd>(y.values.data(), y.values.size());
  const auto got = back_project(g, y);
  const Eigen::Map<const Eigen::VectorXd> got_vec(got.values.data(), got.values.size());
  CHECK((got_vec - expect).cwiseAbs().maxCoeff() <= 1e-12 * expect.cwiseAbs().maxCoeff());
}

TEST_CASE("central ray through a uniform disk measures its chord") {
  FanBeamGeometry g;
  g.image_n = 128;
  g.n_views = 8;
  g.n_detectors = 257;  // odd count puts a detector on the central ray
  const double r_px = 40.0;
  const double mu = kMuWater;
  const Image disk = uniform_disk(128, r_px, mu, g.pixel_mm);
  const auto s = forward_project(g, disk);
  const double expected = 2.0 * mu * r_px * g.pixel_mm;
  for (Index v = 0; v < g.n_views; ++v) {
    CHECK(s.values(v, 128) == doctest::Approx(expected).epsilon(0.01));
  }
}

TEST_CASE("single-ray back projection touches only pixels near that ray") {
  const auto g = oracle::small_geometry(16, 12, 24);
  const int checks[][2] = {{0, 12}, {3, 10}, {7, 14}, {11, 11}, {5, 9}};
  for (const auto& vd : checks) {
    Sino y(g.n_views, g.n_detectors);
    y.values(vd[0], vd[1]) = 1.0;
    const auto img = back_project(g, y);
    int touched = 0;
    for (Index r = 0; r < 16; ++r) {
      for (Index c = 0; c < 16; ++c) {
        const double d = oracle::pixel_distance_to_ray(g, vd[0], vd[1], r, c);
        if (img.values(r, c) != 0.0) {
          ++touched;
          // Bilinear interpolation reaches at most one pixel pitch from the ray.
          CHECK(d < g.pixel_mm * (1.0 + 1e-9));
        }
        if (d < 0.25 * g.pixel_mm) CHECK(img.values(r, c) > 0.0);
      }
    }
    CHECK(touched > 0);
  }
}

TEST_CASE("shape mismatches raise dimension errors") {
  const auto g = oracle::small_geometry(16);
  CHECK_THROWS_AS(forward_project(g, Image(8, 1.0)), DimensionError);
  CHECK_THROWS_AS(back_project(g, Sino(g.n_views + 1, g.n_detectors)), DimensionError);
  CHECK_THROWS_AS(fbp_reconstruct(g, Sino(g.n_views, 3)), DimensionError);
}

TEST_CASE("ramp filter removes constants") {
  Sino s(4, 64);
  s.values.setConstant(3.5);
  for (auto w : {RampWindow::RamLak, RampWindow::Hann}) {
    const auto f = ramp_filter(s, w);
    CHECK(f.values.abs().maxCoeff() < 1e-10 * 3.5);
  }
}

TEST_CASE("ramp filter impulse response is the closed-form kernel") {
  const Index n = 64;
  const Index center = 20;
  Sino s(1, n);
  s.values(0, center) = 1.0;
  const auto f = ramp_filter(s, RampWindow::RamLak);
  // The filter is circular, so compare with the closed form summed over periods.
  for (Index j = 0; j < n; ++j) {
    double periodized = 0.0;
    for (Index m = -2000; m <= 2000; ++m) periodized += oracle::ramlak_tap(j - center + m * n);
    CHECK(std::abs(f.values(0, j) - periodized) < 1e-6);
  }
  CHECK(f.values(0, center) == doctest::Approx(0.25).epsilon(1e-3));
  CHECK(std::abs(f.values(0, center + 2)) < 1e-4);
  CHECK(f.values(0, center + 1) == doctest::Approx(-1.0 / (std::numbers::pi * std::numbers::pi)).epsilon(1e-3));
  CHECK(f.values(0, center + 3) == doctest::Approx(-1.0 / (9 * std::numbers::pi * std::numbers::pi)).epsilon(1e-2));
}

TEST_CASE("ramp kernel taps match the closed form") {
  const auto taps = ramp_kernel_taps(10, RampWindow::RamLak);
  REQUIRE(taps.size() == 21);
  for (Index k = -10; k <= 10; ++k) {
    CHECK(taps[std::size_t(k + 10)] == doctest::Approx(oracle::ramlak_tap(k)).epsilon(1e-15));
  }
  const auto hann = ramp_kernel_taps(10, RampWindow::Hann);
  for (Index k = -9; k <= 9; ++k) {
    const double expect = 0.5 * oracle::ramlak_tap(k) +
                          0.25 * (oracle::ramlak_tap(k - 1) + oracle::ramlak_tap(k + 1));
    CHECK(hann[std::size_t(k + 10)] == doctest::Approx(expect).epsilon(1e-15));
  }
}

TEST_CASE("ramp filter is linear") {
  std::mt19937_64 rng(8);
  const Sino a(oracle::random_array(3, 40, rng));
  const Sino b(oracle::random_array(3, 40, rng));
  const auto lhs = ramp_filter(Sino((a.values + b.values).eval()), RampWindow::Hann).values;
  const auto rhs =
      (ramp_filter(a, RampWindow::Hann).values + ramp_filter(b, RampWindow::Hann).values).eval();
  CHECK((lhs - rhs).abs().maxCoeff() < 1e-13);
}

TEST_CASE("fbp of a zero sinogram is zero") {
  const auto g = oracle::small_geometry(16);
  CHECK((fbp_reconstruct(g, Sino(g.n_views, g.n_detectors)).values == 0.0).all());
}

TEST_CASE("fbp recovers a disk and converges in the number of views") {
  auto rmse_pct = [](int views, RampWindow w) {
    FanBeamGeometry g;
    g.image_n = 128;
    g.n_views = views;
    g.n_detectors = 256;
    const Image disk = uniform_disk(128, 45.0, kMuWater);
    const auto rec = fbp_reconstruct(g, forward_project(g, disk), w);
    double se = 0.0;
    int count = 0;
    for (Index r = 0; r < 128; ++r) {
      for (Index c = 0; c < 128; ++c) {
        const double x = c - 63.5, y = 63.5 - r;
        if (x * x + y * y > 64.0 * 64.0) continue;
        se += std::pow(rec.values(r, c) - disk.values(r, c), 2);
        ++count;
      }
    }
    return 100.0 * std::sqrt(se / count) / kMuWater;
  };
  const double a = rmse_pct(360, RampWindow::RamLak);
  const double b = rmse_pct(720, RampWindow::RamLak);
  CHECK(a < 2.0);
  CHECK(std::abs(a - b) < 0.5);
}

TEST_CASE("float and double projectors agree") {
  const auto g = oracle::small_geometry(16);
  std::mt19937_64 rng(9);
  const Array2d x = oracle::random_array(16, 16, rng);
  const auto d = forward_project(g, Image(x, 1.0));
  const auto f = forward_project(g, ImageGrid<float>(x.cast<float>(), 1.0));
  CHECK((d.values - f.values.cast<double>()).abs().maxCoeff() < 1e-4);
}

TEST_CASE("window names parse") {
  CHECK(parse_ramp_window("ramlak") == RampWindow::RamLak);
  CHECK(parse_ramp_window("hann") == RampWindow::Hann);
  CHECK_THROWS_AS(parse_ramp_window("shepp"), UsageError);
}

}
