#pragma once

// Brute-force reference implementations, deliberately naive and independent
// of the library code they check.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "auxseg/common.hpp"

namespace auxseg::testing {

inline std::vector<float> random_mask(const Extent3& e, double p, std::mt19937_64& rng) {
  std::bernoulli_distribution b(p);
  std::vector<float> v(e.count());
  for (float& x : v) x = b(rng) ? 1.f : 0.f;
  return v;
}

inline double voxel_distance(const Extent3& e, const Vec3& s, std::size_t a, std::size_t b) {
  auto coord = [&](std::size_t i) {
    return std::array<long, 3>{static_cast<long>(i % e.x), static_cast<long>((i / e.x) % e.y),
                               static_cast<long>(i / (static_cast<std::size_t>(e.x) * e.y))};
  };
  const auto p = coord(a), q = coord(b);
  double d2 = 0;
  for (int k = 0; k < 3; ++k) d2 += std::pow((p[k] - q[k]) * s[k], 2);
  return std::sqrt(d2);
}

// Distance from each foreground voxel to the nearest background voxel.
inline std::vector<double> brute_edt(const std::vector<float>& m, const Extent3& e, const Vec3& s) {
  std::vector<std::size_t> bg;
  for (std::size_t i = 0; i < m.size(); ++i)
    if (m[i] == 0.f) bg.push_back(i);
  std::vector<double> out(m.size(), 0.0);
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (m[i] == 0.f) continue;
    out[i] = std::numeric_limits<double>::infinity();
    for (auto j : bg) out[i] = std::min(out[i], voxel_distance(e, s, i, j));
  }
  return out;
}

// Surface voxels by direct neighbour inspection.
inline std::vector<std::size_t> brute_surface(const std::vector<float>& m, const Extent3& e) {
  std::vector<std::size_t> out;
  for (int z = 0; z < e.z; ++z)
    for (int y = 0; y < e.y; ++y)
      for (int x = 0; x < e.x; ++x) {
        if (m[e.index(x, y, z)] == 0.f) continue;
        const int nb[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
        for (auto& d : nb) {
          const int a = x + d[0], b = y + d[1], c = z + d[2];
          if (!e.contains(a, b, c) || m[e.index(a, b, c)] == 0.f) {
            out.push_back(e.index(x, y, z));
            break;
          }
        }
      }
  return out;
}

inline double brute_msd(const std::vector<float>& a, const std::vector<float>& b, const Extent3& e, const Vec3& s) {
  const double inf = std::numeric_limits<double>::infinity();
  const auto sa = brute_surface(a, e), sb = brute_surface(b, e);
  if (sa.empty() && sb.empty()) return 0.0;
  if (sa.empty() || sb.empty()) return inf;
  double total = 0.0;
  for (auto i : sa) {
    double best = inf;
    for (auto j : sb) best = std::min(best, voxel_distance(e, s, i, j));
    total += best;
  }
  for (auto j : sb) {
    double best = inf;
    for (auto i : sa) best = std::min(best, voxel_distance(e, s, i, j));
    total += best;
  }
  return total / static_cast<double>(sa.size() + sb.size());
}

// Exhaustive Otsu: between-class variance of every split evaluated from the
// class members directly. Returns the centre of the last lower-class bin.
inline double brute_otsu(const std::vector<float>& values) {
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it, hi = *hi_it, width = (hi - lo) / 256;
  std::vector<int> bin(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) bin[i] = std::min(255, static_cast<int>((values[i] - lo) / width));
  double best = -1;
  int best_t = 0;
  for (int t = 0; t < 256; ++t) {
    double n0 = 0, n1 = 0, m0 = 0, m1 = 0;
    for (int b : bin) {
      if (b <= t) {
        ++n0;
        m0 += b;
      } else {
        ++n1;
        m1 += b;
      }
    }
    if (n0 == 0 || n1 == 0) continue;
    m0 /= n0;
    m1 /= n1;
    const double n = n0 + n1;
    const double var = n0 / n * n1 / n * (m0 - m1) * (m0 - m1);
    if (var > best) {
      best = var;
      best_t = t;
    }
  }
  return lo + (best_t + 0.5) * width;
}

}  // namespace auxseg::testing
