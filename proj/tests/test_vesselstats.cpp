#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <doctest.h>

#include "auxseg/vesselstats/distance.hpp"
#include "auxseg/vesselstats/skeleton.hpp"
#include "auxseg/vesselstats/stratified.hpp"
#include "support/shapes.hpp"

using namespace auxseg;
using testing::count_components;
using testing::euler_characteristic;
using testing::segment_distance;
using testing::shape_mask;

namespace {

Volume cylinder_x(const Extent3& e, double cy, double cz, double r, int x0, int x1) {
  return shape_mask(e, [=](double x, double y, double z) {
    return x >= x0 && x <= x1 && std::hypot(y - cy, z - cz) <= r;
  });
}

Volume combine(const Volume& a, const Volume& b) {
  std::vector<float> v(a.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = (a[i] != 0.f || b[i] != 0.f) ? 1.f : 0.f;
  return a.with_values(std::move(v));
}

bool subset(const Volume& a, const Volume& b) {
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] != 0.f && b[i] == 0.f) return false;
  return true;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

}  // namespace

TEST_CASE("simple point test on elementary configurations") {
  std::array<bool, 27> cube{};
  cube[13] = true;
  CHECK_FALSE(is_simple_point(cube));  // isolated point
  cube[14] = true;
  CHECK(is_simple_point(cube));  // end of a segment
  cube[12] = true;
  CHECK_FALSE(is_simple_point(cube));  // interior of a curve
  cube.fill(true);
  CHECK_FALSE(is_simple_point(cube));  // interior point: removal creates a cavity
}

TEST_CASE("skeleton of an empty mask is empty") {
  const Volume m = shape_mask({6, 6, 6}, [](double, double, double) { return false; });
  const auto s = skeletonize(m);
  CHECK(s.voxels.empty());
  CHECK(s.skeleton.count_nonzero() == 0);
}

TEST_CASE("skeleton of a cylinder is one axial curve with the cylinder diameter") {
  const Extent3 e{48, 13, 13};
  const Volume m = cylinder_x(e, 6, 6, 3.0, 4, 43);
  const auto s = skeletonize(m);
  CHECK(subset(s.skeleton, m));
  CHECK(count_components(s.skeleton, true) == 1);
  CHECK(euler_characteristic(s.skeleton) == 1);
  CHECK(median(s.diameters_mm) == doctest::Approx(6.0).epsilon(1.0 / 6.0));
  // A curve: every voxel has at most two skeleton neighbours except near junctions, and none here.
  for (std::size_t v : s.voxels) {
    const int x = static_cast<int>(v % e.x), y = static_cast<int>((v / e.x) % e.y), z = static_cast<int>(v / (e.x * e.y));
    CHECK(std::abs(y - 6) <= 1);
    CHECK(std::abs(z - 6) <= 1);
    (void)x;
  }
}

TEST_CASE("skeleton preserves components and loops") {
  SUBCASE("Y junction") {
    const Extent3 e{40, 40, 16};
    const Vec3 c{20, 18, 8}, a{20, 2, 8}, b{5, 36, 8}, d{35, 36, 8};
    const Volume m = shape_mask(e, [&](double x, double y, double z) {
      const Vec3 p{x, y, z};
      return segment_distance(p, c, a) <= 2.5 || segment_distance(p, c, b) <= 2.0 || segment_distance(p, c, d) <= 2.0;
    });
    const auto s = skeletonize(m);
    CHECK(subset(s.skeleton, m));
    CHECK(count_components(s.skeleton, true) == count_components(m, true));
    CHECK(euler_characteristic(m) == 1);
    CHECK(euler_characteristic(s.skeleton) == 1);
    CHECK(s.voxels.size() > 30);
  }
  SUBCASE("solid torus keeps exactly one loop") {
    const Extent3 e{32, 32, 12};
    const Volume m = shape_mask(e, [](double x, double y, double z) {
      const double rho = std::hypot(x - 15.5, y - 15.5);
      return std::hypot(rho - 10.0, z - 5.5) <= 3.0;
    });
    CHECK(euler_characteristic(m) == 0);
    const auto s = skeletonize(m);
    CHECK(subset(s.skeleton, m));
    CHECK(count_components(s.skeleton, true) == 1);
    CHECK(euler_characteristic(s.skeleton) == 0);  // one component, one loop
    CHECK(count_components(s.skeleton, false, 0.f) == 1);  // no cavities
    CHECK(s.voxels.size() < 150);
  }
  SUBCASE("two separate tubes") {
    const Extent3 e{30, 20, 12};
    const Volume m = combine(cylinder_x(e, 5, 5, 2.0, 2, 27), cylinder_x(e, 14, 6, 2.5, 2, 27));
    const auto s = skeletonize(m);
    CHECK(count_components(m, true) == 2);
    CHECK(count_components(s.skeleton, true) == 2);
  }
}

TEST_CASE("skeleton preserves components of random blobs") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 6; ++t) {
    const Extent3 e{20, 18, 16};
    std::vector<std::array<double, 4>> balls(5);
    for (auto& b : balls) b = {2 + 16 * u(rng), 2 + 14 * u(rng), 2 + 12 * u(rng), 1.5 + 3 * u(rng)};
    const Volume m = shape_mask(e, [&](double x, double y, double z) {
      for (const auto& b : balls)
        if (std::hypot(x - b[0], y - b[1], z - b[2]) <= b[3]) return true;
      return false;
    });
    const auto s = skeletonize(m);
    CHECK(subset(s.skeleton, m));
    CHECK(count_components(s.skeleton, true) == count_components(m, true));
    CHECK(euler_characteristic(s.skeleton) == euler_characteristic(m));
  }
}

TEST_CASE("thickness bins") {
  ThicknessBins b;
  CHECK(b.bin(0.0) == 0);
  CHECK(b.bin(4.999) == 0);
  CHECK(b.bin(5.0) == 1);
  CHECK(b.bin(14.9) == 2);
  CHECK(b.bin(15.0) == 3);
  CHECK(b.bin(1e9) == 3);
  CHECK(b.label(0) == "0-5");
  CHECK(b.label(3) == ">15");
  ThicknessBins bad{{0.0, 5.0, 5.0}};
  CHECK_THROWS_AS(bad.validate(), ArgumentError);
  ThicknessBins no_zero{{1.0, 5.0}};
  CHECK_THROWS_AS(no_zero.validate(), ArgumentError);
}

TEST_CASE("thickness partition of cylinders") {
  SUBCASE("diameter 6 mm cylinder lands in the 5-10 mm group") {
    const Extent3 e{48, 13, 13};
    const Volume m = cylinder_x(e, 6, 6, 3.0, 4, 43);
    const Volume p = thickness_partition(m);
    std::size_t total = 0, in_group = 0;
    for (std::size_t i = 0; i < m.size(); ++i) {
      if (m[i] == 0.f) {
        CHECK(p[i] == -1.f);
        continue;
      }
      ++total;
      in_group += p[i] == 1.f;
    }
    CHECK(static_cast<double>(in_group) / total >= 0.9);
  }
  SUBCASE("thin and thick cylinders populate exactly two groups") {
    // Both cylinders cross the whole grid, so they have no end caps (the EDT
    // never treats out-of-grid voxels as background).
    const Extent3 e{60, 40, 24};
    const Volume m = combine(cylinder_x(e, 5, 12, 1.0, 0, 59), cylinder_x(e, 24, 12, 9.0, 0, 59));
    const Volume p = thickness_partition(m);
    std::array<std::size_t, 4> counts{};
    for (std::size_t i = 0; i < m.size(); ++i) {
      if (m[i] != 0.f) {
        REQUIRE(p[i] >= 0.f);
        ++counts[static_cast<int>(p[i])];
      }
    }
    CHECK(counts[0] > 0);
    CHECK(counts[1] == 0);
    CHECK(counts[2] == 0);
    CHECK(counts[3] > 0);
  }
  SUBCASE("empty ground truth") {
    const Volume m = shape_mask({8, 8, 8}, [](double, double, double) { return false; });
    const Volume p = thickness_partition(m);
    for (float v : p.values()) CHECK(v == -1.f);
  }
}

TEST_CASE("stratified metrics") {
  const Extent3 e{80, 40, 24};
  const Volume thin = cylinder_x(e, 5, 12, 1.0, 3, 76);
  const Volume thick = cylinder_x(e, 24, 12, 9.0, 3, 76);
  const Volume gt = combine(thin, thick);

  SUBCASE("perfect prediction") {
    const auto r = stratified_metrics(gt, gt);
    double share = 0.0;
    for (const auto& g : r.groups) {
      share += g.voxel_share;
      if (g.counts.tp > 0) {
        CHECK(g.dice == 1.0);
        CHECK(g.msd_mm == 0.0);
      }
    }
    CHECK(share == doctest::Approx(1.0));
  }

  SUBCASE("false positives go to the group of the nearest skeleton voxel") {
    // Blob touching the thick cylinder on the far side from the thin one,
    // plus some missed voxels of the thin cylinder.
    std::vector<float> pred = gt.copy_values();
    std::size_t blob = 0;
    for (int z = 9; z <= 14; ++z)
      for (int y = 34; y <= 37; ++y)
        for (int x = 30; x <= 40; ++x) {
          const std::size_t i = e.index(x, y, z);
          if (gt[i] == 0.f) {
            pred[i] = 1.f;
            ++blob;
          }
        }
    for (int x = 3; x <= 20; ++x) pred[e.index(x, 5, 12)] = 0.f;
    const Volume P = gt.with_values(pred);
    const auto r = stratified_metrics(gt, P);
    CHECK(r.groups[3].counts.fp == blob);
    CHECK(r.groups[0].counts.fp == 0);
    CHECK(r.groups[0].counts.fn == 18);
    metrics::ConfusionCounts sum;
    for (const auto& g : r.groups) sum += g.counts;
    CHECK(sum == r.global);
  }

  SUBCASE("group counts sum to the global counts on random predictions") {
    std::mt19937_64 rng(4);
    std::bernoulli_distribution flip(0.05);
    std::vector<float> pred = gt.copy_values();
    for (float& v : pred)
      if (flip(rng)) v = 1.f - v;
    const auto r = stratified_metrics(gt, gt.with_values(pred));
    metrics::ConfusionCounts sum;
    for (const auto& g : r.groups) sum += g.counts;
    CHECK(sum == r.global);
  }

  SUBCASE("grid mismatch") {
    const Volume other = shape_mask({10, 10, 10}, [](double, double, double) { return true; });
    CHECK_THROWS_AS(stratified_metrics(gt, other), ArgumentError);
  }
}
