#pragma once

#include "auxseg/volumes/volume.hpp"

namespace auxseg {

/// Z-score normalization over all voxels (population statistics).
/// If the standard deviation is below 1e-6 the result is all zeros.
Volume zscore_normalize(const Volume& v);

/// Resamples onto a grid of target extent covering the same physical
/// extent (cell-centred alignment, spacing scaled by old/new count).
/// Label volumes use nearest neighbour; other kinds use trilinear
/// interpolation with edge clamping.
Volume resample(const Volume& v, const Extent3& target);

}  // namespace auxseg
