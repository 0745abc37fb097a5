#include "auxseg/sampling/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "auxseg/random.hpp"

namespace auxseg {

void AugmentConfig::validate() const {
  for (double p : p_flip) {
    if (!(p >= 0.0 && p <= 1.0)) throw ArgumentError("flip probabilities must lie in [0, 1]");
  }
  if (!(elastic.probability >= 0.0 && elastic.probability <= 1.0)) {
    throw ArgumentError("elastic probability must lie in [0, 1]");
  }
  if (!(elastic.displacement_sigma >= 0.0)) throw ArgumentError("elastic displacement sigma must be >= 0");
  if (!(elastic.grid_spacing > 0.0)) throw ArgumentError("elastic grid spacing must be > 0");
  if (!(max_rotation_deg >= 0.0)) throw ArgumentError("max rotation must be >= 0");
}

AugmentConfig AugmentConfig::identity() {
  AugmentConfig cfg;
  cfg.p_flip = {0.0, 0.0, 0.0};
  cfg.max_rotation_deg = 0.0;
  cfg.elastic.probability = 0.0;
  return cfg;
}

bool SpatialTransform::is_identity() const {
  return !flip[0] && !flip[1] && !flip[2] && is_permutation();
}

SpatialTransform draw_transform(const AugmentConfig& cfg, std::uint64_t step_seed, const Extent3& extent) {
  cfg.validate();
  Rng rng = make_rng({cfg.seed, step_seed, 0xa06eULL});
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  SpatialTransform t;
  for (int a = 0; a < 3; ++a) t.flip[a] = unit(rng) < cfg.p_flip[a];
  const double u = unit(rng);
  if (cfg.max_rotation_deg > 0.0) {
    t.rotation_rad = (2.0 * u - 1.0) * cfg.max_rotation_deg * std::numbers::pi / 180.0;
  }
  const double e = unit(rng);
  if (e < cfg.elastic.probability && cfg.elastic.displacement_sigma > 0.0) {
    t.elastic = true;
    t.control_spacing = cfg.elastic.grid_spacing;
    for (int a = 0; a < 3; ++a) {
      t.control_extent[a] = static_cast<int>(std::ceil((extent[a] - 1) / cfg.elastic.grid_spacing)) + 1;
    }
    std::normal_distribution<double> normal(0.0, cfg.elastic.displacement_sigma);
    t.control_displacement.resize(3 * t.control_extent.count());
    for (float& d : t.control_displacement) d = static_cast<float>(normal(rng));
  }
  return t;
}

namespace {

struct Sampler {
  const Volume& v;
  bool nearest;

  float operator()(double x, double y, double z) const {
    const Extent3& e = v.extent();
    x = std::clamp(x, 0.0, static_cast<double>(e.x - 1));
    y = std::clamp(y, 0.0, static_cast<double>(e.y - 1));
    z = std::clamp(z, 0.0, static_cast<double>(e.z - 1));
    if (nearest) {
      return v.at(static_cast<int>(std::floor(x + 0.5)), static_cast<int>(std::floor(y + 0.5)),
                  static_cast<int>(std::floor(z + 0.5)));
    }
    const int x0 = static_cast<int>(std::floor(x)), y0 = static_cast<int>(std::floor(y)),
              z0 = static_cast<int>(std::floor(z));
    const int x1 = std::min(x0 + 1, e.x - 1), y1 = std::min(y0 + 1, e.y - 1), z1 = std::min(z0 + 1, e.z - 1);
    const float fx = static_cast<float>(x - x0), fy = static_cast<float>(y - y0), fz = static_cast<float>(z - z0);
    auto lerp = [](float a, float b, float t) { return a + (b - a) * t; };
    const float c00 = lerp(v.at(x0, y0, z0), v.at(x1, y0, z0), fx);
    const float c10 = lerp(v.at(x0, y1, z0), v.at(x1, y1, z0), fx);
    const float c01 = lerp(v.at(x0, y0, z1), v.at(x1, y0, z1), fx);
    const float c11 = lerp(v.at(x0, y1, z1), v.at(x1, y1, z1), fx);
    return lerp(lerp(c00, c10, fy), lerp(c01, c11, fy), fz);
  }
};

// Trilinear interpolation of the control-grid displacement at voxel (i, j, k).
std::array<double, 3> displacement_at(const SpatialTransform& t, int i, int j, int k) {
  const double gx = i / t.control_spacing, gy = j / t.control_spacing, gz = k / t.control_spacing;
  const Extent3& c = t.control_extent;
  const int x0 = std::min(static_cast<int>(gx), c.x - 1), y0 = std::min(static_cast<int>(gy), c.y - 1),
            z0 = std::min(static_cast<int>(gz), c.z - 1);
  const int x1 = std::min(x0 + 1, c.x - 1), y1 = std::min(y0 + 1, c.y - 1), z1 = std::min(z0 + 1, c.z - 1);
  const double fx = gx - x0, fy = gy - y0, fz = gz - z0;
  std::array<double, 3> out{};
  for (int d = 0; d < 3; ++d) {
    auto at = [&](int x, int y, int z) { return static_cast<double>(t.control_displacement[3 * c.index(x, y, z) + d]); };
    const double c00 = at(x0, y0, z0) * (1 - fx) + at(x1, y0, z0) * fx;
    const double c10 = at(x0, y1, z0) * (1 - fx) + at(x1, y1, z0) * fx;
    const double c01 = at(x0, y0, z1) * (1 - fx) + at(x1, y0, z1) * fx;
    const double c11 = at(x0, y1, z1) * (1 - fx) + at(x1, y1, z1) * fx;
    out[d] = (c00 * (1 - fy) + c10 * fy) * (1 - fz) + (c01 * (1 - fy) + c11 * fy) * fz;
  }
  return out;
}

}  // namespace

Volume apply_transform(const Volume& v, const SpatialTransform& t) {
  const Extent3& e = v.extent();
  if (t.is_identity()) return v;
  std::vector<float> out(e.count());

  if (t.is_permutation()) {
    for (int k = 0; k < e.z; ++k) {
      const int sk = t.flip[2] ? e.z - 1 - k : k;
      for (int j = 0; j < e.y; ++j) {
        const int sj = t.flip[1] ? e.y - 1 - j : j;
        for (int i = 0; i < e.x; ++i) {
          const int si = t.flip[0] ? e.x - 1 - i : i;
          out[e.index(i, j, k)] = v.at(si, sj, sk);
        }
      }
    }
    return v.with_values(std::move(out));
  }

  const Sampler sample{v, v.kind() == VolumeKind::label};
  const double cx = 0.5 * (e.x - 1), cy = 0.5 * (e.y - 1);
  const double cs = std::cos(t.rotation_rad), sn = std::sin(t.rotation_rad);
  for (int k = 0; k < e.z; ++k) {
    for (int j = 0; j < e.y; ++j) {
      for (int i = 0; i < e.x; ++i) {
        double x = i, y = j, z = k;
        if (t.elastic) {
          const auto d = displacement_at(t, i, j, k);
          x += d[0];
          y += d[1];
          z += d[2];
        }
        const double rx = cx + cs * (x - cx) - sn * (y - cy);
        const double ry = cy + sn * (x - cx) + cs * (y - cy);
        x = rx;
        y = ry;
        if (t.flip[0]) x = (e.x - 1) - x;
        if (t.flip[1]) y = (e.y - 1) - y;
        if (t.flip[2]) z = (e.z - 1) - z;
        out[e.index(i, j, k)] = sample(x, y, z);
      }
    }
  }
  if (v.kind() == VolumeKind::probability) {
    for (float& x : out) x = std::clamp(x, 0.0f, 1.0f);
  }
  return v.with_values(std::move(out));
}

Sample augment_sample(const Sample& s, const AugmentConfig& cfg, std::uint64_t step_seed) {
  s.validate();
  const SpatialTransform t = draw_transform(cfg, step_seed, s.source.extent());
  Sample out;
  out.id = s.id;
  out.role = s.role;
  out.source = apply_transform(s.source, t);
  if (s.auxiliary) out.auxiliary = apply_transform(*s.auxiliary, t);
  if (s.label) out.label = apply_transform(*s.label, t);
  if (s.liver_mask) out.liver_mask = apply_transform(*s.liver_mask, t);
  return out;
}

}  // namespace auxseg
