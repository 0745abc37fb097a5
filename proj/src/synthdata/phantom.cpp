#include "auxseg/synthdata/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "auxseg/random.hpp"
#include "auxseg/volumes/preprocess.hpp"

namespace auxseg::synth {

namespace {

Vec3 add(const Vec3& a, const Vec3& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
Vec3 sub(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
Vec3 scale(const Vec3& a, double s) { return {a[0] * s, a[1] * s, a[2] * s}; }
double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}
Vec3 normalized(const Vec3& a) {
  const double n = std::sqrt(dot(a, a));
  return n > 0.0 ? scale(a, 1.0 / n) : Vec3{1.0, 0.0, 0.0};
}

Vec3 random_unit(Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  return normalized({normal(rng), normal(rng), normal(rng)});
}

// Rotates v about the unit axis k by angle (Rodrigues).
Vec3 rotate(const Vec3& v, const Vec3& k, double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  return add(add(scale(v, c), scale(cross(k, v), s)), scale(k, dot(k, v) * (1.0 - c)));
}

double point_segment_distance(const Vec3& p, const Segment& seg) {
  const Vec3 ab = sub(seg.b, seg.a);
  const double len2 = dot(ab, ab);
  double t = len2 > 0.0 ? dot(sub(p, seg.a), ab) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const Vec3 d = sub(p, add(seg.a, scale(ab, t)));
  return std::sqrt(dot(d, d));
}

Vec3 voxel_center(const Extent3&, const Vec3& spacing, int i, int j, int k) {
  return {i * spacing[0], j * spacing[1], k * spacing[2]};
}

class TreeGrower {
 public:
  TreeGrower(const PhantomConfig& cfg, const Ellipsoid& liver, Rng& rng) : cfg_(cfg), liver_(liver), rng_(rng) {}

  void grow(Tree& tree, const Vec3& start, const Vec3& dir, double radius, int level) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double length = radius * (3.0 + 1.5 * unit(rng_)) + 4.0;
    Vec3 end = add(start, scale(dir, length));
    for (int attempt = 0; attempt < 8 && !liver_.contains(end); ++attempt) {
      length *= 0.75;
      end = add(start, scale(dir, length));
    }
    if (!liver_.contains(end) || length < radius) return;
    tree.segments.push_back({start, end, radius, level});
    if (level >= cfg_.branch_levels) return;

    // Two children spread on opposite sides of a random plane through the
    // parent axis, nudged back towards the liver centre.
    const Vec3 axis = normalized(cross(dir, random_unit(rng_)));
    const Vec3 inward = normalized(sub(liver_.center, end));
    for (int child = 0; child < 2; ++child) {
      const double angle = (25.0 + 20.0 * unit(rng_)) * std::numbers::pi / 180.0;
      Vec3 d = rotate(dir, axis, child == 0 ? angle : -angle);
      d = normalized(add(d, scale(inward, 0.3)));
      const double jitter = 1.0 + cfg_.radius_jitter * (2.0 * unit(rng_) - 1.0);
      grow(tree, end, d, radius * cfg_.radius_decay * jitter, level + 1);
    }
  }

 private:
  const PhantomConfig& cfg_;
  const Ellipsoid& liver_;
  Rng& rng_;
};

}  // namespace

void PhantomConfig::validate() const {
  for (int a = 0; a < 3; ++a) {
    if (shape[a] < 8) throw ArgumentError("phantom shape must be at least 8 voxels per axis");
    if (!(spacing_mm[a] > 0.0)) throw ArgumentError("phantom spacing must be > 0");
  }
  if (n_trees < 0) throw ArgumentError("n_trees must be >= 0");
  if (branch_levels < 0) throw ArgumentError("branch_levels must be >= 0");
  if (!(root_radius_mm > 0.0)) throw ArgumentError("root_radius_mm must be > 0");
  if (!(radius_decay > 0.0 && radius_decay < 1.0)) throw ArgumentError("radius_decay must lie in (0, 1)");
  if (!(radius_jitter >= 0.0 && radius_jitter < 1.0)) throw ArgumentError("radius_jitter must lie in [0, 1)");
  if (!(noise_sigma >= 0.0)) throw ArgumentError("noise_sigma must be >= 0");
  if (!(bias_field_amplitude >= 0.0 && bias_field_amplitude < 1.0)) {
    throw ArgumentError("bias_field_amplitude must lie in [0, 1)");
  }
  if (!(liver_fraction > 0.0 && liver_fraction <= 0.5)) throw ArgumentError("liver_fraction must lie in (0, 0.5]");
}

bool Ellipsoid::contains(const Vec3& p, double margin) const {
  double s = 0.0;
  for (int a = 0; a < 3; ++a) {
    const double r = semi_axes[a] - margin;
    if (r <= 0.0) return false;
    const double d = (p[a] - center[a]) / r;
    s += d * d;
  }
  return s <= 1.0;
}

Ellipsoid liver_ellipsoid(const PhantomConfig& cfg) {
  Ellipsoid e;
  for (int a = 0; a < 3; ++a) {
    const double side = cfg.shape[a] * cfg.spacing_mm[a];
    e.center[a] = 0.5 * (cfg.shape[a] - 1) * cfg.spacing_mm[a];
    e.semi_axes[a] = cfg.liver_fraction * side;
  }
  return e;
}

Tree generate_tree(const PhantomConfig& cfg, std::uint64_t tree_seed) {
  cfg.validate();
  Rng rng = make_rng({tree_seed, 0x7ee});
  const Ellipsoid liver = liver_ellipsoid(cfg);
  const Vec3 u = random_unit(rng);
  Vec3 start;
  for (int a = 0; a < 3; ++a) start[a] = liver.center[a] + 0.8 * liver.semi_axes[a] * u[a];
  const Vec3 dir = normalized(add(normalized(sub(liver.center, start)), scale(random_unit(rng), 0.3)));
  Tree tree;
  TreeGrower(cfg, liver, rng).grow(tree, start, dir, cfg.root_radius_mm, 0);
  return tree;
}

PhantomMasks rasterize(const std::vector<Tree>& trees, const PhantomConfig& cfg) {
  cfg.validate();
  const Extent3 e = cfg.shape;
  const Vec3& sp = cfg.spacing_mm;
  const Ellipsoid liver = liver_ellipsoid(cfg);
  std::vector<float> liver_v(e.count(), 0.f), vessel_v(e.count(), 0.f);
  for (int k = 0; k < e.z; ++k)
    for (int j = 0; j < e.y; ++j)
      for (int i = 0; i < e.x; ++i) {
        if (liver.contains(voxel_center(e, sp, i, j, k))) liver_v[e.index(i, j, k)] = 1.f;
      }
  for (const Tree& tree : trees) {
    for (const Segment& seg : tree.segments) {
      std::array<int, 3> lo, hi;
      for (int a = 0; a < 3; ++a) {
        const double mn = std::min(seg.a[a], seg.b[a]) - seg.radius;
        const double mx = std::max(seg.a[a], seg.b[a]) + seg.radius;
        lo[a] = std::max(0, static_cast<int>(std::floor(mn / sp[a])));
        hi[a] = std::min(e[a] - 1, static_cast<int>(std::ceil(mx / sp[a])));
      }
      for (int k = lo[2]; k <= hi[2]; ++k)
        for (int j = lo[1]; j <= hi[1]; ++j)
          for (int i = lo[0]; i <= hi[0]; ++i) {
            const std::size_t idx = e.index(i, j, k);
            if (vessel_v[idx] != 0.f || liver_v[idx] == 0.f) continue;
            if (point_segment_distance(voxel_center(e, sp, i, j, k), seg) <= seg.radius) vessel_v[idx] = 1.f;
          }
    }
  }
  Geometry g{e, sp, {0.0, 0.0, 0.0}};
  return {Volume(g, std::move(vessel_v), VolumeKind::label), Volume(g, std::move(liver_v), VolumeKind::label)};
}

PhantomImages render_pair(const PhantomMasks& masks, const PhantomConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const Extent3 e = masks.liver.extent();
  Rng rng = make_rng({seed, 0xb1a5});
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  // Smooth multiplicative bias: three random low-frequency cosines.
  struct Wave {
    Vec3 w;
    double phase, weight;
  };
  std::array<Wave, 3> waves;
  for (auto& w : waves) {
    for (double& c : w.w) c = 2.0 * unit(rng) - 1.0;
    w.phase = 2.0 * std::numbers::pi * unit(rng);
    w.weight = 0.5 + unit(rng);
  }
  std::vector<double> field(e.count());
  double peak = 0.0;
  for (int k = 0; k < e.z; ++k)
    for (int j = 0; j < e.y; ++j)
      for (int i = 0; i < e.x; ++i) {
        const Vec3 x{static_cast<double>(i) / e.x, static_cast<double>(j) / e.y, static_cast<double>(k) / e.z};
        double f = 0.0;
        for (const auto& w : waves) f += w.weight * std::cos(2.0 * std::numbers::pi * dot(w.w, x) + w.phase);
        field[e.index(i, j, k)] = f;
        peak = std::max(peak, std::abs(f));
      }
  if (peak > 0.0) {
    for (double& f : field) f = 1.0 + cfg.bias_field_amplitude * f / peak;
  }

  Rng noise_native = make_rng({seed, 0x9a71});
  Rng noise_contrast = make_rng({seed, 0xc0de});
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto liver = masks.liver.values();
  const auto vessel = masks.vessel.values();
  std::vector<float> native(e.count()), contrast(e.count());
  for (std::size_t i = 0; i < e.count(); ++i) {
    const double tissue = liver[i] != 0.f ? 1.0 : cfg.background_intensity;
    const double v = vessel[i];
    native[i] = static_cast<float>((tissue + v * cfg.vessel_contrast.native) * field[i] +
                                   cfg.noise_sigma * normal(noise_native));
    contrast[i] = static_cast<float>((tissue + v * cfg.vessel_contrast.contrast_enhanced) * field[i] +
                                     cfg.noise_sigma * normal(noise_contrast));
  }
  const Geometry& g = masks.liver.geometry();
  return {zscore_normalize(Volume(g, std::move(native), VolumeKind::intensity)),
          zscore_normalize(Volume(g, std::move(contrast), VolumeKind::intensity))};
}

std::uint64_t case_seed(std::uint64_t master_seed, std::size_t index) {
  return derive_seed({master_seed, 0xca5e, index});
}

Phantom generate_phantom(const PhantomConfig& cfg, std::uint64_t seed) {
  Phantom p;
  for (int t = 0; t < cfg.n_trees; ++t) p.trees.push_back(generate_tree(cfg, derive_seed({seed, 0x77, static_cast<std::uint64_t>(t)})));
  p.masks = rasterize(p.trees, cfg);
  p.images = render_pair(p.masks, cfg, seed);
  return p;
}

DatasetManifest generate_dataset(int n_triplets, int n_pairs, int n_test, const PhantomConfig& cfg,
                                 const std::filesystem::path& out_dir, VolumeFormat format) {
  if (n_triplets < 0 || n_pairs < 0 || n_test < 0) throw ArgumentError("case counts must be >= 0");
  cfg.validate();
  std::filesystem::create_directories(out_dir);
  const std::string ext = format == VolumeFormat::nifti ? ".nii.gz" : ".raw";
  DatasetManifest manifest;
  manifest.root = out_dir;
  const int total = n_triplets + n_pairs + n_test;
  for (int c = 0; c < total; ++c) {
    const SampleRole role = c < n_triplets ? SampleRole::triplet
                            : c < n_triplets + n_pairs ? SampleRole::pair
                                                       : SampleRole::test;
    const std::uint64_t seed = case_seed(cfg.seed, static_cast<std::size_t>(c));
    const Phantom p = generate_phantom(cfg, seed);
    ManifestRecord r;
    r.id = fmt::format("case_{:03d}", c);
    r.role = role;
    r.seed = seed;
    r.source = out_dir / (r.id + "_source" + ext);
    save_volume(p.images.native, r.source, format);
    r.auxiliary = out_dir / (r.id + "_aux" + ext);
    save_volume(p.images.contrast, *r.auxiliary, format);
    if (role != SampleRole::pair) {
      r.label = out_dir / (r.id + "_label" + ext);
      save_volume(p.masks.vessel, *r.label, format);
    }
    r.liver_mask = out_dir / (r.id + "_liver" + ext);
    save_volume(p.masks.liver, *r.liver_mask, format);
    manifest.records.push_back(std::move(r));
    spdlog::debug("generated {} ({})", manifest.records.back().id, to_string(role));
  }
  save_manifest(manifest, out_dir / "manifest.json");
  return manifest;
}

}  // namespace auxseg::synth
