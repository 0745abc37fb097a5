#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "auxseg/volumes/manifest.hpp"
#include "auxseg/volumes/volume_io.hpp"

namespace auxseg::synth {

struct VesselContrast {
  double native = 0.12;             // added vessel intensity in the source image
  double contrast_enhanced = 1.0;   // added vessel intensity in the auxiliary image
};

/// Procedural liver phantom with bifurcating vessel trees. Intensities are
/// relative to liver tissue = 1 before z-scoring.
struct PhantomConfig {
  Extent3 shape{96, 96, 64};
  Vec3 spacing_mm{1.0, 1.0, 1.0};
  int n_trees = 2;
  double root_radius_mm = 9.0;
  int branch_levels = 5;
  double radius_decay = 0.75;
  double radius_jitter = 0.1;  // child radius factor decay * (1 +- jitter)
  VesselContrast vessel_contrast;
  double noise_sigma = 0.1;
  double bias_field_amplitude = 0.1;
  double background_intensity = 0.45;  // tissue outside the liver
  double liver_fraction = 0.44;       // ellipsoid semi-axis / volume side
  std::uint64_t seed = 0;

  void validate() const;
};

/// One straight tree branch (capsule between two points, mm).
struct Segment {
  Vec3 a, b;
  double radius = 0.0;
  int level = 0;
};

struct Tree {
  std::vector<Segment> segments;  // depth-first order, root first
};

/// Liver ellipsoid centre and semi-axes (mm, physical coordinates).
struct Ellipsoid {
  Vec3 center, semi_axes;
  bool contains(const Vec3& p, double margin = 0.0) const;
};

Ellipsoid liver_ellipsoid(const PhantomConfig& cfg);

/// Recursive bifurcating tree grown from a random point near the liver
/// boundary towards its interior. branch_levels 0 gives a single segment.
Tree generate_tree(const PhantomConfig& cfg, std::uint64_t tree_seed);

struct PhantomMasks {
  Volume vessel;  // label, subset of liver
  Volume liver;   // label
};

/// Vessel voxel iff its centre lies within `radius` of a segment (and inside
/// the liver); liver voxel iff inside the ellipsoid.
PhantomMasks rasterize(const std::vector<Tree>& trees, const PhantomConfig& cfg);

struct PhantomImages {
  Volume native;    // source modality, z-scored
  Volume contrast;  // auxiliary modality, z-scored
};

/// Tissue intensities times a smooth bias field, plus vessel contrast and
/// independent Gaussian noise in each image.
PhantomImages render_pair(const PhantomMasks& masks, const PhantomConfig& cfg, std::uint64_t seed);

struct Phantom {
  std::vector<Tree> trees;
  PhantomMasks masks;
  PhantomImages images;
};

/// Complete case from one seed.
Phantom generate_phantom(const PhantomConfig& cfg, std::uint64_t case_seed);

/// Seed of case `index` under a master seed.
std::uint64_t case_seed(std::uint64_t master_seed, std::size_t index);

/// Writes n_triplets + n_pairs + n_test cases and manifest.json into
/// `out_dir`. Roles are assigned in that order; ids are case_000, ...
/// Pairs carry no label. Every record stores its generator seed.
DatasetManifest generate_dataset(int n_triplets, int n_pairs, int n_test, const PhantomConfig& cfg,
                                 const std::filesystem::path& out_dir,
                                 VolumeFormat format = VolumeFormat::nifti);

}  // namespace auxseg::synth
