#pragma once

#include <array>
#include <cstdint>

#include "auxseg/volumes/volume.hpp"

namespace auxseg {

struct ElasticConfig {
  double grid_spacing = 32.0;       // control-point spacing, voxels
  double displacement_sigma = 4.0;  // per-component std of control displacements, voxels
  double probability = 0.5;
};

/// Random spatial augmentation. Rotation is about the through-plane (z)
/// axis with angle uniform in [-max_rotation_deg, +max_rotation_deg].
struct AugmentConfig {
  std::array<double, 3> p_flip{0.5, 0.5, 0.5};
  double max_rotation_deg = 10.0;
  ElasticConfig elastic;
  std::uint64_t seed = 0;

  void validate() const;

  /// Configuration that leaves samples unchanged.
  static AugmentConfig identity();
};

/// The concrete transform drawn for one augmentation call.
struct SpatialTransform {
  std::array<bool, 3> flip{false, false, false};
  double rotation_rad = 0.0;
  bool elastic = false;
  Extent3 control_extent;
  double control_spacing = 1.0;
  std::vector<float> control_displacement;  // 3 per control node, x-fastest nodes

  bool is_identity() const;
  bool is_permutation() const { return rotation_rad == 0.0 && !elastic; }
};

/// Draws the transform for (cfg.seed, step_seed) on a grid of the given extent.
SpatialTransform draw_transform(const AugmentConfig& cfg, std::uint64_t step_seed, const Extent3& extent);

/// Applies a transform: intensity volumes are sampled trilinearly, label
/// volumes by nearest neighbour (so they stay binary); borders are clamped.
Volume apply_transform(const Volume& v, const SpatialTransform& t);

/// Applies one transform, drawn deterministically from (cfg.seed, step_seed),
/// to every volume of the sample.
Sample augment_sample(const Sample& s, const AugmentConfig& cfg, std::uint64_t step_seed);

}  // namespace auxseg
