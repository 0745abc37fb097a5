#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "auxseg/volumes/volume.hpp"

namespace auxseg {

/// Exact squared Euclidean distance (mm^2) from every voxel to the nearest
/// feature voxel, with the linear index of that feature. Voxels outside the
/// grid are never features. Without any feature, distances are +inf and
/// indices -1.
struct FeatureTransform {
  std::vector<double> sq_distance;
  std::vector<std::int64_t> nearest;
};

/// Separable lower-envelope algorithm (Felzenszwalb & Huttenlocher), one
/// pass per axis, anisotropic spacing.
FeatureTransform feature_transform(std::span<const std::uint8_t> is_feature, const Extent3& extent,
                                   const Vec3& spacing);

/// Distance (mm) of each foreground voxel to the nearest background voxel;
/// background voxels are 0. A mask without background gives +inf.
Volume edt(const Volume& mask);

/// Foreground voxels with at least one face-adjacent background neighbour;
/// neighbours outside the grid count as background.
std::vector<std::uint8_t> surface_voxels(std::span<const float> mask, const Extent3& extent);

}  // namespace auxseg
