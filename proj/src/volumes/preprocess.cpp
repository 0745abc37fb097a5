#include "auxseg/volumes/preprocess.hpp"

#include <algorithm>
#include <cmath>

namespace auxseg {

Volume zscore_normalize(const Volume& v) {
  if (v.kind() != VolumeKind::intensity) throw ArgumentError("zscore_normalize expects an intensity volume");
  const auto values = v.values();
  double sum = 0.0;
  for (float x : values) sum += x;
  const double mean = sum / static_cast<double>(values.size());
  double ss = 0.0;
  for (float x : values) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / static_cast<double>(values.size()));

  std::vector<float> out(values.size(), 0.0f);
  if (sd >= 1e-6) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<float>((values[i] - mean) / sd);
  }
  return v.with_values(std::move(out));
}

namespace {

struct AxisMap {
  std::vector<int> lo;
  std::vector<int> hi;
  std::vector<float> frac;
  std::vector<int> nearest;
};

AxisMap axis_map(int n_in, int n_out) {
  AxisMap m;
  m.lo.resize(n_out);
  m.hi.resize(n_out);
  m.frac.resize(n_out);
  m.nearest.resize(n_out);
  const double scale = static_cast<double>(n_in) / static_cast<double>(n_out);
  for (int i = 0; i < n_out; ++i) {
    double c = n_in == n_out ? i : (i + 0.5) * scale - 0.5;
    c = std::clamp(c, 0.0, static_cast<double>(n_in - 1));
    const int lo = static_cast<int>(std::floor(c));
    m.lo[i] = lo;
    m.hi[i] = std::min(lo + 1, n_in - 1);
    m.frac[i] = static_cast<float>(c - lo);
    m.nearest[i] = std::clamp(static_cast<int>(std::floor(c + 0.5)), 0, n_in - 1);
  }
  return m;
}

}  // namespace

Volume resample(const Volume& v, const Extent3& target) {
  if (target.x < 1 || target.y < 1 || target.z < 1) throw ArgumentError("resample target extent must be >= 1");
  const Extent3& src = v.extent();
  Geometry g = v.geometry();
  g.extent = target;
  for (int a = 0; a < 3; ++a) {
    const double old_spacing = v.spacing()[a];
    g.spacing[a] = old_spacing * static_cast<double>(src[a]) / static_cast<double>(target[a]);
    g.origin[a] = v.origin()[a] + 0.5 * (g.spacing[a] - old_spacing);
  }
  if (target == src) return Volume(g, v.copy_values(), v.kind());

  const AxisMap mx = axis_map(src.x, target.x);
  const AxisMap my = axis_map(src.y, target.y);
  const AxisMap mz = axis_map(src.z, target.z);
  std::vector<float> out(target.count());
  const bool nearest = v.kind() == VolumeKind::label;
  for (int k = 0; k < target.z; ++k) {
    for (int j = 0; j < target.y; ++j) {
      for (int i = 0; i < target.x; ++i) {
        float value;
        if (nearest) {
          value = v.at(mx.nearest[i], my.nearest[j], mz.nearest[k]);
        } else {
          const float fx = mx.frac[i], fy = my.frac[j], fz = mz.frac[k];
          auto lerp = [](float a, float b, float t) { return a + (b - a) * t; };
          const float c00 = lerp(v.at(mx.lo[i], my.lo[j], mz.lo[k]), v.at(mx.hi[i], my.lo[j], mz.lo[k]), fx);
          const float c10 = lerp(v.at(mx.lo[i], my.hi[j], mz.lo[k]), v.at(mx.hi[i], my.hi[j], mz.lo[k]), fx);
          const float c01 = lerp(v.at(mx.lo[i], my.lo[j], mz.hi[k]), v.at(mx.hi[i], my.lo[j], mz.hi[k]), fx);
          const float c11 = lerp(v.at(mx.lo[i], my.hi[j], mz.hi[k]), v.at(mx.hi[i], my.hi[j], mz.hi[k]), fx);
          value = lerp(lerp(c00, c10, fy), lerp(c01, c11, fy), fz);
        }
        out[target.index(i, j, k)] = value;
      }
    }
  }
  if (v.kind() == VolumeKind::probability) {
    for (float& x : out) x = std::clamp(x, 0.0f, 1.0f);
  }
  return Volume(g, std::move(out), v.kind());
}

}  // namespace auxseg
