#pragma once

#include <string>
#include <vector>

#include "pnpmbir/types.hpp"

namespace pnpmbir {

enum class PhantomKind { SheppLogan, DiskGrid, SoftTissueSlab };

PhantomKind parse_phantom_kind(const std::string& name);
std::string to_string(PhantomKind kind);

/// One insert of the disk grid: pixel-center location and attenuation (1/mm).
struct DiskInsert {
  Index row;
  Index col;
  double radius_px;
  double mu;
};

/// The 3x3 disk layout used by PhantomKind::DiskGrid at a given side length.
/// Each disk is centered on a pixel center.
std::vector<DiskInsert> disk_grid_layout(Index side);

/// Attenuation phantom in 1/mm, values clamped to [0, 0.1], 4x4 supersampled.
/// Requires side >= 16.
Image make_phantom(PhantomKind kind, Index side, double pixel_mm = 1.0);

/// Uniform disk of attenuation `mu`, centered on the image center, anti-aliased
/// by 4x4 supersampling.
Image uniform_disk(Index side, double radius_px, double mu, double pixel_mm = 1.0);

}  // namespace pnpmbir
