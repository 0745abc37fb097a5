#include "auxseg/vesselstats/skeleton.hpp"

#include <algorithm>
#include <array>
#include <cstdlib>

#include "auxseg/vesselstats/distance.hpp"

namespace auxseg {

namespace {

constexpr int kCentre = 13;

int cube_index(int dx, int dy, int dz) { return (dx + 1) + 3 * ((dy + 1) + 3 * (dz + 1)); }

// Adjacency among the 27 cube positions, computed once.
struct CubeTables {
  std::array<std::vector<int>, 27> adj26;  // 26-neighbours inside the cube, centre excluded
  std::array<std::vector<int>, 27> adj6;   // 6-neighbours inside the 18-neighbourhood
  std::array<bool, 27> in_n18{};
  std::array<int, 6> faces{};

  CubeTables() {
    auto coords = [](int c) { return std::array<int, 3>{c % 3 - 1, (c / 3) % 3 - 1, c / 9 - 1}; };
    for (int c = 0; c < 27; ++c) {
      const auto p = coords(c);
      const int l1 = std::abs(p[0]) + std::abs(p[1]) + std::abs(p[2]);
      in_n18[c] = l1 >= 1 && l1 <= 2;
    }
    int f = 0;
    for (int c = 0; c < 27; ++c) {
      const auto p = coords(c);
      if (std::abs(p[0]) + std::abs(p[1]) + std::abs(p[2]) == 1) faces[f++] = c;
      for (int d = 0; d < 27; ++d) {
        if (d == c || c == kCentre || d == kCentre) continue;
        const auto q = coords(d);
        const int cheb = std::max({std::abs(p[0] - q[0]), std::abs(p[1] - q[1]), std::abs(p[2] - q[2])});
        const int l1 = std::abs(p[0] - q[0]) + std::abs(p[1] - q[1]) + std::abs(p[2] - q[2]);
        if (cheb == 1) adj26[c].push_back(d);
        if (l1 == 1 && in_n18[c] && in_n18[d]) adj6[c].push_back(d);
      }
    }
  }
};

const CubeTables& tables() {
  static const CubeTables t;
  return t;
}

}  // namespace

bool is_simple_point(const std::array<bool, 27>& cube) {
  const CubeTables& t = tables();
  std::array<int, 27> stack;
  std::array<bool, 27> seen{};

  // 26-components of the foreground neighbours.
  int components = 0;
  for (int s = 0; s < 27; ++s) {
    if (s == kCentre || !cube[s] || seen[s]) continue;
    if (++components > 1) return false;
    int top = 0;
    stack[top++] = s;
    seen[s] = true;
    while (top > 0) {
      const int c = stack[--top];
      for (int d : t.adj26[c]) {
        if (cube[d] && !seen[d]) {
          seen[d] = true;
          stack[top++] = d;
        }
      }
    }
  }
  if (components != 1) return false;

  // 6-components of background in N18 that are 6-adjacent to the centre.
  seen.fill(false);
  components = 0;
  for (int s : t.faces) {
    if (cube[s] || seen[s]) continue;
    if (++components > 1) return false;
    int top = 0;
    stack[top++] = s;
    seen[s] = true;
    while (top > 0) {
      const int c = stack[--top];
      for (int d : t.adj6[c]) {
        if (!cube[d] && !seen[d]) {
          seen[d] = true;
          stack[top++] = d;
        }
      }
    }
  }
  return components == 1;
}

SkeletonResult skeletonize(const Volume& mask) {
  const Extent3& e = mask.extent();
  // One voxel of background padding removes all bounds checks.
  const Extent3 p{e.x + 2, e.y + 2, e.z + 2};
  std::vector<std::uint8_t> img(p.count(), 0);
  std::vector<std::size_t> alive;
  for (int k = 0; k < e.z; ++k)
    for (int j = 0; j < e.y; ++j)
      for (int i = 0; i < e.x; ++i) {
        if (mask.at(i, j, k) != 0.f) {
          const std::size_t idx = p.index(i + 1, j + 1, k + 1);
          img[idx] = 1;
          alive.push_back(idx);
        }
      }

  std::array<std::ptrdiff_t, 27> offset;
  for (int dz = -1; dz <= 1; ++dz)
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        offset[cube_index(dx, dy, dz)] =
            dx + static_cast<std::ptrdiff_t>(p.x) * (dy + static_cast<std::ptrdiff_t>(p.y) * dz);
      }
  const std::array<int, 6> directions{cube_index(0, 0, 1),  cube_index(0, 0, -1), cube_index(0, 1, 0),
                                      cube_index(0, -1, 0), cube_index(1, 0, 0),  cube_index(-1, 0, 0)};

  auto neighbourhood = [&](std::size_t idx) {
    std::array<bool, 27> cube;
    for (int c = 0; c < 27; ++c) cube[c] = img[idx + offset[c]] != 0;
    return cube;
  };
  auto is_curve_end = [&](const std::array<bool, 27>& cube) {
    int n = 0;
    for (int c = 0; c < 27; ++c) n += (c != kCentre && cube[c]);
    return n == 1;
  };

  std::vector<std::size_t> candidates;
  bool changed = true;
  while (changed) {
    changed = false;
    for (int dir : directions) {
      candidates.clear();
      for (std::size_t idx : alive) {
        if (img[idx + offset[dir]] != 0) continue;
        const auto cube = neighbourhood(idx);
        if (!is_curve_end(cube) && is_simple_point(cube)) candidates.push_back(idx);
      }
      for (std::size_t idx : candidates) {
        const auto cube = neighbourhood(idx);
        if (!is_curve_end(cube) && is_simple_point(cube)) {
          img[idx] = 0;
          changed = true;
        }
      }
      if (!candidates.empty()) std::erase_if(alive, [&](std::size_t idx) { return img[idx] == 0; });
    }
  }

  SkeletonResult r;
  std::vector<float> skel(e.count(), 0.f);
  const Volume dist = edt(mask);
  for (int k = 0; k < e.z; ++k)
    for (int j = 0; j < e.y; ++j)
      for (int i = 0; i < e.x; ++i) {
        if (img[p.index(i + 1, j + 1, k + 1)] == 0) continue;
        const std::size_t idx = e.index(i, j, k);
        skel[idx] = 1.f;
        r.voxels.push_back(idx);
        r.diameters_mm.push_back(2.0 * dist[idx]);
      }
  r.skeleton = mask.with_values(std::move(skel), VolumeKind::label);
  return r;
}

}  // namespace auxseg
