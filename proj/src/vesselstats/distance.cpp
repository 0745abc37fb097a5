#include "auxseg/vesselstats/distance.hpp"

#include <cmath>
#include <limits>

namespace auxseg {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// One 1-D pass over a line of n samples with stride `step` starting at
// `base`: d[p] = min_q (s (p - q))^2 + f[q]; the feature index is carried
// from the minimising q.
struct LinePass {
  std::vector<double> f, d;
  std::vector<std::int64_t> fi;
  std::vector<int> v;
  std::vector<double> z;

  explicit LinePass(int n) : f(n), d(n), fi(n), v(n), z(n + 1) {}

  void run(std::vector<double>& dist, std::vector<std::int64_t>& idx, std::size_t base, std::size_t step, int n,
           double s) {
    for (int q = 0; q < n; ++q) {
      f[q] = dist[base + q * step];
      fi[q] = idx[base + q * step];
    }
    const double s2 = s * s;
    int k = -1;
    for (int q = 0; q < n; ++q) {
      if (f[q] == kInf) continue;
      if (k < 0) {
        k = 0;
        v[0] = q;
        z[0] = -kInf;
        z[1] = kInf;
        continue;
      }
      auto meet = [&](int r) { return ((f[q] + s2 * q * q) - (f[r] + s2 * r * r)) / (2.0 * s2 * (q - r)); };
      double x = meet(v[k]);
      while (x <= z[k]) x = meet(v[--k]);  // z[0] = -inf stops the loop
      ++k;
      v[k] = q;
      z[k] = x;
      z[k + 1] = kInf;
    }
    if (k < 0) return;  // no features on this line; leave it at +inf
    int j = 0;
    for (int p = 0; p < n; ++p) {
      while (z[j + 1] < p) ++j;
      const int r = v[j];
      const double dp = s * (p - r);
      dist[base + p * step] = dp * dp + f[r];
      idx[base + p * step] = fi[r];
    }
  }
};

}  // namespace

FeatureTransform feature_transform(std::span<const std::uint8_t> is_feature, const Extent3& e, const Vec3& spacing) {
  const std::size_t n = e.count();
  if (is_feature.size() != n) throw ArgumentError("feature mask size does not match extent");
  FeatureTransform ft;
  ft.sq_distance.assign(n, kInf);
  ft.nearest.assign(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    if (is_feature[i]) {
      ft.sq_distance[i] = 0.0;
      ft.nearest[i] = static_cast<std::int64_t>(i);
    }
  }
  const std::size_t sx = 1, sy = e.x, sz = static_cast<std::size_t>(e.x) * e.y;
  {
    LinePass pass(e.x);
    for (int k = 0; k < e.z; ++k)
      for (int j = 0; j < e.y; ++j) pass.run(ft.sq_distance, ft.nearest, j * sy + k * sz, sx, e.x, spacing[0]);
  }
  {
    LinePass pass(e.y);
    for (int k = 0; k < e.z; ++k)
      for (int i = 0; i < e.x; ++i) pass.run(ft.sq_distance, ft.nearest, i + k * sz, sy, e.y, spacing[1]);
  }
  {
    LinePass pass(e.z);
    for (int j = 0; j < e.y; ++j)
      for (int i = 0; i < e.x; ++i) pass.run(ft.sq_distance, ft.nearest, i + j * sy, sz, e.z, spacing[2]);
  }
  return ft;
}

Volume edt(const Volume& mask) {
  const auto values = mask.values();
  std::vector<std::uint8_t> background(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) background[i] = values[i] < 0.5f;
  const FeatureTransform ft = feature_transform(background, mask.extent(), mask.spacing());
  std::vector<float> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = static_cast<float>(std::sqrt(ft.sq_distance[i]));
  return mask.with_values(std::move(out), VolumeKind::intensity);
}

std::vector<std::uint8_t> surface_voxels(std::span<const float> mask, const Extent3& e) {
  if (mask.size() != e.count()) throw ArgumentError("mask size does not match extent");
  std::vector<std::uint8_t> out(mask.size(), 0);
  auto fg = [&](int i, int j, int k) {
    if (i < 0 || j < 0 || k < 0 || i >= e.x || j >= e.y || k >= e.z) return false;
    return mask[e.index(i, j, k)] >= 0.5f;
  };
  for (int k = 0; k < e.z; ++k) {
    for (int j = 0; j < e.y; ++j) {
      for (int i = 0; i < e.x; ++i) {
        if (!fg(i, j, k)) continue;
        if (!fg(i - 1, j, k) || !fg(i + 1, j, k) || !fg(i, j - 1, k) || !fg(i, j + 1, k) || !fg(i, j, k - 1) ||
            !fg(i, j, k + 1)) {
          out[e.index(i, j, k)] = 1;
        }
      }
    }
  }
  return out;
}

}  // namespace auxseg
