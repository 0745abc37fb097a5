#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "auxseg/volumes/volume.hpp"

namespace auxseg {

struct SkeletonResult {
  Volume skeleton;                    // binary label volume
  std::vector<std::size_t> voxels;    // linear indices of skeleton voxels, ascending
  std::vector<double> diameters_mm;   // 2 x EDT of the input mask, parallel to `voxels`
};

/// True when removing the centre of the 3x3x3 neighbourhood `cube` (27
/// entries, x fastest, centre at 13) preserves topology: exactly one
/// 26-component of foreground among the 26 neighbours and exactly one
/// 6-component of background in the 18-neighbourhood that touches the
/// centre.
bool is_simple_point(const std::array<bool, 27>& cube);

/// Curve skeleton by directional thinning. Each iteration runs six
/// sub-iterations (one per face direction); border voxels that are simple
/// and not curve ends are collected and then removed one at a time with the
/// simple-point test re-evaluated, so topology is preserved under 26/6
/// connectivity. Voxels outside the grid are background.
SkeletonResult skeletonize(const Volume& mask);

}  // namespace auxseg
