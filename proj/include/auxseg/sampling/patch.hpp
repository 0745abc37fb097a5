#pragma once

#include <vector>

#include "auxseg/volumes/volume.hpp"

namespace auxseg {

/// Voxel index triple (patch origins, offsets).
using Index3 = Extent3;

/// Patch size and stride in voxels; 1 <= stride[i] <= patch_size[i].
struct PatchSpec {
  Extent3 patch_size{128, 96, 64};
  Extent3 stride{32, 24, 16};

  void validate() const;
};

/// Origins covering a grid of extent `shape` in raster order (x fastest).
/// Along each axis origins advance by the stride; the last origin is clamped
/// so the final patch ends exactly at the boundary. Throws ArgumentError if
/// the patch does not fit.
std::vector<Index3> patch_grid(const Extent3& shape, const PatchSpec& spec);

/// Per-axis origins used by patch_grid.
std::vector<int> axis_origins(int length, int patch, int stride);

/// Copy of the sub-grid [origin, origin + size). The physical origin is
/// shifted accordingly; spacing and kind are inherited.
Volume extract_patch(const Volume& v, const Index3& origin, const Extent3& size);

/// Raw copy of the same region into `out` (size.count() floats).
void extract_region(std::span<const float> values, const Extent3& extent, const Index3& origin, const Extent3& size,
                    std::span<float> out);

}  // namespace auxseg
