#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <vector>

#include "auxseg/volumes/volume.hpp"

namespace auxseg::testing {

inline Volume shape_mask(const Extent3& e, const std::function<bool(double, double, double)>& inside,
                         const Vec3& spacing = {1, 1, 1}) {
  std::vector<float> v(e.count(), 0.f);
  for (int z = 0; z < e.z; ++z)
    for (int y = 0; y < e.y; ++y)
      for (int x = 0; x < e.x; ++x) v[e.index(x, y, z)] = inside(x, y, z) ? 1.f : 0.f;
  return Volume(Geometry{e, spacing, {0, 0, 0}}, std::move(v), VolumeKind::label);
}

inline double segment_distance(const Vec3& p, const Vec3& a, const Vec3& b) {
  Vec3 ab{b[0] - a[0], b[1] - a[1], b[2] - a[2]}, ap{p[0] - a[0], p[1] - a[1], p[2] - a[2]};
  const double len2 = ab[0] * ab[0] + ab[1] * ab[1] + ab[2] * ab[2];
  double t = (ap[0] * ab[0] + ap[1] * ab[1] + ap[2] * ab[2]) / len2;
  t = std::clamp(t, 0.0, 1.0);
  double d2 = 0;
  for (int k = 0; k < 3; ++k) d2 += std::pow(ap[k] - t * ab[k], 2);
  return std::sqrt(d2);
}

/// Number of connected components of the nonzero voxels; `full` selects
/// 26-connectivity, otherwise 6-connectivity. `value` selects foreground (1)
/// or background (0) voxels.
inline int count_components(const Volume& m, bool full, float value = 1.f) {
  const Extent3& e = m.extent();
  std::vector<char> seen(e.count(), 0);
  auto match = [&](std::size_t i) { return (m[i] != 0.f) == (value != 0.f); };
  int n = 0;
  std::vector<std::array<int, 3>> stack;
  for (int z = 0; z < e.z; ++z)
    for (int y = 0; y < e.y; ++y)
      for (int x = 0; x < e.x; ++x) {
        const std::size_t s = e.index(x, y, z);
        if (seen[s] || !match(s)) continue;
        ++n;
        seen[s] = 1;
        stack.push_back({x, y, z});
        while (!stack.empty()) {
          const auto p = stack.back();
          stack.pop_back();
          for (int dz = -1; dz <= 1; ++dz)
            for (int dy = -1; dy <= 1; ++dy)
              for (int dx = -1; dx <= 1; ++dx) {
                const int l1 = std::abs(dx) + std::abs(dy) + std::abs(dz);
                if (l1 == 0 || (!full && l1 != 1)) continue;
                const int a = p[0] + dx, b = p[1] + dy, c = p[2] + dz;
                if (!e.contains(a, b, c)) continue;
                const std::size_t i = e.index(a, b, c);
                if (!seen[i] && match(i)) {
                  seen[i] = 1;
                  stack.push_back({a, b, c});
                }
              }
        }
      }
  return n;
}

/// Euler characteristic of the union of closed unit cubes (one per
/// foreground voxel), counted on the doubled lattice: a cell with k odd
/// coordinates is a k-dimensional face.
inline int euler_characteristic(const Volume& m) {
  const Extent3& e = m.extent();
  const Extent3 d{2 * e.x + 1, 2 * e.y + 1, 2 * e.z + 1};
  std::vector<char> cell(d.count(), 0);
  for (int z = 0; z < e.z; ++z)
    for (int y = 0; y < e.y; ++y)
      for (int x = 0; x < e.x; ++x) {
        if (m.at(x, y, z) == 0.f) continue;
        for (int c = 0; c < 3; ++c)
          for (int b = 0; b < 3; ++b)
            for (int a = 0; a < 3; ++a) cell[d.index(2 * x + a, 2 * y + b, 2 * z + c)] = 1;
      }
  int chi = 0;
  for (int z = 0; z < d.z; ++z)
    for (int y = 0; y < d.y; ++y)
      for (int x = 0; x < d.x; ++x) {
        if (!cell[d.index(x, y, z)]) continue;
        const int k = (x & 1) + (y & 1) + (z & 1);
        chi += (k % 2 == 0) ? 1 : -1;
      }
  return chi;
}

}  // namespace auxseg::testing
