#include "pnpmbir/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace pnpmbir {

namespace {

constexpr int kSubsamples = 4;

struct Ellipse {
  double cx, cy, a, b, phi_deg, value;

  bool contains(double u, double v) const {
    const double phi = phi_deg * std::numbers::pi / 180.0;
    const double du = u - cx;
    const double dv = v - cy;
    const double p = du * std::cos(phi) + dv * std::sin(phi);
    const double q = -du * std::sin(phi) + dv * std::cos(phi);
    return (p * p) / (a * a) + (q * q) / (b * b) <= 1.0;
  }
};

// Kak & Slaney intensities; scaled by the water attenuation so that the brain
// matter sits at +20 HU and the skull near +1000 HU.
const std::vector<Ellipse> kSheppLogan = {
    {0.0, 0.0, 0.69, 0.92, 0.0, 2.0},         {0.0, -0.0184, 0.6624, 0.874, 0.0, -0.98},
    {0.22, 0.0, 0.11, 0.31, -18.0, -0.02},    {-0.22, 0.0, 0.16, 0.41, 18.0, -0.02},
    {0.0, 0.35, 0.21, 0.25, 0.0, 0.01},       {0.0, 0.1, 0.046, 0.046, 0.0, 0.01},
    {0.0, -0.1, 0.046, 0.046, 0.0, 0.01},     {-0.08, -0.605, 0.046, 0.023, 0.0, 0.01},
    {0.0, -0.605, 0.023, 0.023, 0.0, 0.01},   {0.06, -0.605, 0.023, 0.046, 0.0, 0.01},
};

// Abdomen-like slice, painted in order (later inserts overwrite), values in HU.
const std::vector<Ellipse> kSoftTissue = {
    {0.0, 0.0, 0.86, 0.62, 0.0, -100.0},      // subcutaneous fat
    {0.0, 0.0, 0.80, 0.56, 0.0, 40.0},        // muscle / soft tissue
    {-0.35, 0.1, 0.32, 0.28, 10.0, 60.0},     // liver
    {0.45, 0.15, 0.15, 0.20, -15.0, 50.0},    // spleen
    {-0.30, -0.25, 0.09, 0.13, 0.0, 30.0},    // kidney
    {0.30, -0.25, 0.09, 0.13, 0.0, 30.0},     // kidney
    {0.0, -0.40, 0.11, 0.11, 0.0, 700.0},     // vertebral body
    {0.0, -0.40, 0.04, 0.04, 0.0, 20.0},      // canal
    {0.08, -0.18, 0.05, 0.05, 0.0, 150.0},    // enhanced aorta
    {0.20, 0.35, 0.07, 0.05, 0.0, -1000.0},   // bowel gas
    {-0.45, 0.15, 0.05, 0.05, 0.0, 80.0},     // hyperdense lesion
    {-0.25, 0.00, 0.04, 0.04, 0.0, 35.0},     // hypodense lesion
};

const double kDiskGridHu[9] = {-100.0, 0.0, 20.0, 40.0, 60.0, 100.0, 200.0, 500.0, 1000.0};

/// Supersampled rasterization of `value_at(u, v)` on normalized coordinates in [-1, 1].
template <typename F>
Image rasterize(Index side, double pixel_mm, F&& value_at) {
  Image img(side, pixel_mm);
  const double c = 0.5 * double(side - 1);
  const double half = 0.5 * double(side);
  double samples[kSubsamples * kSubsamples];
  for (Index row = 0; row < side; ++row) {
    for (Index col = 0; col < side; ++col) {
      int k = 0;
      for (int sy = 0; sy < kSubsamples; ++sy) {
        for (int sx = 0; sx < kSubsamples; ++sx) {
          const double off_x = (sx + 0.5) / kSubsamples - 0.5;
          const double off_y = (sy + 0.5) / kSubsamples - 0.5;
          const double u = (double(col) + off_x - c) / half;
          const double v = (c - (double(row) + off_y)) / half;
          samples[k++] = value_at(u, v);
        }
      }
      const bool uniform =
          std::all_of(samples, samples + k, [&](double s) { return s == samples[0]; });
      double value = samples[0];
      if (!uniform) {
        double acc = 0.0;
        for (int i = 0; i < k; ++i) acc += samples[i];
        value = acc / k;
      }
      img.values(row, col) = std::clamp(value, 0.0, 0.1);
    }
  }
  return img;
}

}  // namespace

PhantomKind parse_phantom_kind(const std::string& name) {
  if (name == "shepp_logan") return PhantomKind::SheppLogan;
  if (name == "disk_grid") return PhantomKind::DiskGrid;
  if (name == "soft_tissue_slab") return PhantomKind::SoftTissueSlab;
  throw UsageError("unknown phantom kind '" + name +
                   "' (expected shepp_logan, disk_grid or soft_tissue_slab)");
}

std::string to_string(PhantomKind kind) {
  switch (kind) {
    case PhantomKind::SheppLogan: return "shepp_logan";
    case PhantomKind::DiskGrid: return "disk_grid";
    case PhantomKind::SoftTissueSlab: return "soft_tissue_slab";
  }
  return "unknown";
}

std::vector<DiskInsert> disk_grid_layout(Index side) {
  std::vector<DiskInsert> disks;
  const double c = 0.5 * double(side - 1);
  const double spacing = 0.25 * double(side);
  const double radius = 0.09 * double(side);
  int k = 0;
  for (int gy = -1; gy <= 1; ++gy) {
    for (int gx = -1; gx <= 1; ++gx) {
      const Index row = Index(std::floor(c + gy * spacing));
      const Index col = Index(std::floor(c + gx * spacing));
      disks.push_back({row, col, radius, hu_to_mu(kDiskGridHu[k++])});
    }
  }
  return disks;
}

Image make_phantom(PhantomKind kind, Index side, double pixel_mm) {
  if (side < 16) throw UsageError("phantom side must be >= 16, got " + std::to_string(side));
  switch (kind) {
    case PhantomKind::SheppLogan:
      return rasterize(side, pixel_mm, [](double u, double v) {
        double acc = 0.0;
        for (const auto& e : kSheppLogan) {
          if (e.contains(u, v)) acc += e.value;
        }
        return acc * kMuWater;
      });
    case PhantomKind::SoftTissueSlab:
      return rasterize(side, pixel_mm, [](double u, double v) {
        double mu = 0.0;
        for (const auto& e : kSoftTissue) {
          if (e.contains(u, v)) mu = hu_to_mu(e.value);
        }
        return mu;
      });
    case PhantomKind::DiskGrid: {
      const auto disks = disk_grid_layout(side);
      const double c = 0.5 * double(side - 1);
      const double half = 0.5 * double(side);
      return rasterize(side, pixel_mm, [&](double u, double v) {
        // Back to continuous pixel coordinates.
        const double col = u * half + c;
        const double row = c - v * half;
        for (const auto& d : disks) {
          const double dr = row - double(d.row);
          const double dc = col - double(d.col);
          if (dr * dr + dc * dc <= d.radius_px * d.radius_px) return d.mu;
        }
        return 0.0;
      });
    }
  }
  throw UsageError("unknown phantom kind");
}

Image uniform_disk(Index side, double radius_px, double mu, double pixel_mm) {
  const double half = 0.5 * double(side);
  const double r = radius_px / half;
  return rasterize(side, pixel_mm, [&](double u, double v) {
    return u * u + v * v <= r * r ? mu : 0.0;
  });
}

}  // namespace pnpmbir
