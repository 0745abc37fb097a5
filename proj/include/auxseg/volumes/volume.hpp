#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "auxseg/common.hpp"

namespace auxseg {

enum class VolumeKind { intensity, label, probability };

std::string_view to_string(VolumeKind kind);
VolumeKind parse_volume_kind(std::string_view text);

/// Sampling grid of a volume: extent in voxels, spacing and origin in mm.
struct Geometry {
  Extent3 extent;
  Vec3 spacing{1.0, 1.0, 1.0};
  Vec3 origin{0.0, 0.0, 0.0};
};

/// True when both grids have the same extent and (to 1e-5 relative) spacing.
bool same_grid(const Geometry& a, const Geometry& b);

/// Immutable 3D scalar grid. Values are float32, x-fastest.
///
/// Construction validates the kind invariants: label volumes hold only
/// {0, 1}; probability volumes hold values in [0, 1].
class Volume {
 public:
  Volume() = default;
  Volume(Geometry geometry, std::vector<float> values, VolumeKind kind);

  static Volume zeros(const Geometry& geometry, VolumeKind kind);

  const Geometry& geometry() const { return geometry_; }
  const Extent3& extent() const { return geometry_.extent; }
  const Vec3& spacing() const { return geometry_.spacing; }
  const Vec3& origin() const { return geometry_.origin; }
  VolumeKind kind() const { return kind_; }

  std::span<const float> values() const { return values_; }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  float operator[](std::size_t i) const { return values_[i]; }
  float at(int i, int j, int k) const { return values_[geometry_.extent.index(i, j, k)]; }

  /// Copy of the values, for building derived volumes.
  std::vector<float> copy_values() const { return values_; }

  /// New volume on the same grid with different values (and optionally kind).
  Volume with_values(std::vector<float> values) const;
  Volume with_values(std::vector<float> values, VolumeKind kind) const;

  /// Number of nonzero voxels.
  std::size_t count_nonzero() const;

 private:
  Geometry geometry_;
  std::vector<float> values_;
  VolumeKind kind_ = VolumeKind::intensity;
};

/// Threshold at 0.5 into a {0,1} label volume.
Volume binarize(const Volume& v, float threshold = 0.5f);

enum class SampleRole { triplet, pair, test };

std::string_view to_string(SampleRole role);
SampleRole parse_sample_role(std::string_view text);

/// One training or test record: source image, optional auxiliary image,
/// optional vessel label and liver mask. All present volumes share a grid.
struct Sample {
  std::string id;
  SampleRole role = SampleRole::test;
  Volume source;
  std::optional<Volume> auxiliary;
  std::optional<Volume> label;
  std::optional<Volume> liver_mask;

  bool is_triplet() const { return auxiliary.has_value() && label.has_value(); }
  bool is_pair() const { return auxiliary.has_value() && !label.has_value(); }

  /// Throws ArgumentError if present volumes disagree on grid.
  void validate() const;
};

}  // namespace auxseg
