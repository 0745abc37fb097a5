#include <cmath>
#include <random>

#include <doctest.h>

#include "auxseg/frangi/frangi.hpp"
#include "support/oracles.hpp"
#include "support/shapes.hpp"

using namespace auxseg;
using testing::brute_otsu;
using testing::shape_mask;

namespace {

Volume intensity(const Volume& mask, float fg, float bg) {
  std::vector<float> v(mask.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = mask[i] != 0.f ? fg : bg;
  return mask.with_values(std::move(v), VolumeKind::intensity);
}

}  // namespace

TEST_CASE("vesselness of a constant volume is zero") {
  const Volume v = shape_mask({12, 12, 12}, [](double, double, double) { return true; });
  const Volume r = frangi_vesselness(intensity(v, 3.f, 3.f));
  for (float x : r.values()) CHECK(x == 0.f);
}

TEST_CASE("a bright tube stands out from the background") {
  const Extent3 e{40, 24, 24};
  const Volume tube = shape_mask(e, [](double, double y, double z) { return std::hypot(y - 11.5, z - 11.5) <= 2.0; });
  FrangiParams p;
  p.scales_mm = {1, 2, 3};
  const Volume r = frangi_vesselness(intensity(tube, 1.f, 0.f), p);
  double axis = 0, bg = 0;
  int na = 0, nb = 0;
  for (int z = 0; z < e.z; ++z)
    for (int y = 0; y < e.y; ++y)
      for (int x = 5; x < 35; ++x) {
        const double d = std::hypot(y - 11.5, z - 11.5);
        if (d <= 0.8) {
          axis += r.at(x, y, z);
          ++na;
        } else if (d >= 6.0) {
          bg += r.at(x, y, z);
          ++nb;
        }
      }
  axis /= na;
  bg /= nb;
  CHECK(axis > 0.1);
  CHECK(axis > 10 * bg);
  for (float x : r.values()) {
    CHECK(x >= 0.f);
    CHECK(x <= 1.f);
  }

  p.bright_on_dark = false;
  const Volume dark = frangi_vesselness(intensity(tube, 1.f, 0.f), p);
  CHECK(dark.at(20, 11, 11) == 0.f);
}

TEST_CASE("tubes score higher than blobs of the same radius") {
  const Extent3 e{32, 32, 32};
  FrangiParams p;
  p.scales_mm = {1, 2, 3};
  const Volume tube = shape_mask(e, [](double, double y, double z) { return std::hypot(y - 16, z - 16) <= 3.0; });
  const Volume ball = shape_mask(e, [](double x, double y, double z) { return std::hypot(x - 16, y - 16, z - 16) <= 3.0; });
  const Volume rt = frangi_vesselness(intensity(tube, 1.f, 0.f), p);
  const Volume rb = frangi_vesselness(intensity(ball, 1.f, 0.f), p);
  double tube_axis = 0;
  for (int x = 8; x < 24; ++x) tube_axis += rt.at(x, 16, 16);
  tube_axis /= 16;
  CHECK(tube_axis > rb.at(16, 16, 16));
}

TEST_CASE("vesselness invariants") {
  std::mt19937_64 rng(2);
  std::normal_distribution<float> n(0.f, 1.f);
  const Extent3 e{16, 14, 12};
  const Volume tube = shape_mask(e, [](double, double y, double z) { return std::hypot(y - 7, z - 6) <= 2.0; });
  std::vector<float> v(e.count()), shifted(e.count());
  for (std::size_t i = 0; i < v.size(); ++i) {
    v[i] = (tube[i] != 0.f ? 2.f : 0.f) + 0.3f * n(rng);
    shifted[i] = v[i] + 5.f;
  }
  FrangiParams few;
  few.scales_mm = {1.0, 2.0};
  FrangiParams more = few;
  more.scales_mm.push_back(3.0);
  const Volume a = frangi_vesselness(tube.with_values(v, VolumeKind::intensity), few);
  const Volume b = frangi_vesselness(tube.with_values(shifted, VolumeKind::intensity), few);
  const Volume c = frangi_vesselness(tube.with_values(v, VolumeKind::intensity), more);
  double worst = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    worst = std::max(worst, static_cast<double>(std::abs(a[i] - b[i])));
    CHECK(c[i] >= a[i]);
  }
  CHECK(worst < 1e-3);
}

TEST_CASE("Frangi parameter validation") {
  FrangiParams p;
  p.scales_mm.clear();
  CHECK_THROWS_AS(p.validate(), ArgumentError);
  p.scales_mm = {1.0, -1.0};
  CHECK_THROWS_AS(p.validate(), ArgumentError);
  p.scales_mm = {1.0};
  p.alpha = 0.0;
  CHECK_THROWS_AS(p.validate(), ArgumentError);
}

TEST_CASE("Otsu threshold") {
  std::vector<float> bimodal(200);
  for (std::size_t i = 0; i < bimodal.size(); ++i) bimodal[i] = i % 2 ? 0.9f : 0.1f;
  const double t = otsu_threshold(bimodal);
  CHECK(t > 0.1);
  CHECK(t < 0.9);

  std::mt19937_64 rng(13);
  std::uniform_int_distribution<int> size(50, 400);
  std::normal_distribution<float> n(0.f, 1.f);
  std::uniform_real_distribution<float> u(0.f, 1.f);
  for (int k = 0; k < 100; ++k) {
    std::vector<float> values(size(rng));
    const float split = u(rng), gap = 3.f * u(rng);
    for (float& x : values) x = n(rng) + (u(rng) < split ? gap : 0.f);
    CHECK(otsu_threshold(values) == doctest::Approx(brute_otsu(values)).epsilon(1e-9));
  }

  const std::vector<float> constant(20, 1.5f);
  CHECK_THROWS_AS(otsu_threshold(constant), ArgumentError);
}

TEST_CASE("Frangi with Otsu on degenerate and simple inputs") {
  const Volume ones = shape_mask({10, 10, 10}, [](double, double, double) { return true; });
  const Volume seg = frangi_otsu_segment(intensity(ones, 2.f, 2.f));
  CHECK(seg.count_nonzero() == 0);

  const Extent3 e{40, 24, 24};
  const Volume tube = shape_mask(e, [](double, double y, double z) { return std::hypot(y - 11.5, z - 11.5) <= 2.5; });
  const Volume s = frangi_otsu_segment(intensity(tube, 1.f, 0.f));
  std::size_t tp = 0;
  for (std::size_t i = 0; i < s.size(); ++i) tp += s[i] != 0.f && tube[i] != 0.f;
  const double dice = 2.0 * tp / (s.count_nonzero() + tube.count_nonzero());
  CHECK(dice > 0.5);
}
