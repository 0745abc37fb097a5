#include <cmath>
#include <filesystem>

#include <doctest.h>

#include "auxseg/io_util.hpp"
#include "auxseg/synthdata/phantom.hpp"
#include "auxseg/vesselstats/distance.hpp"
#include "auxseg/vesselstats/stratified.hpp"

using namespace auxseg;
namespace fs = std::filesystem;

namespace {

synth::PhantomConfig small_config() {
  synth::PhantomConfig c;
  c.shape = {48, 48, 32};
  c.root_radius_mm = 5.0;
  c.branch_levels = 3;
  c.seed = 5;
  return c;
}

struct Gap {
  double native, contrast, liver_sd_native;
};

Gap vessel_gaps(const synth::Phantom& p) {
  double v[2] = {0, 0}, t[2] = {0, 0}, t2 = 0;
  std::size_t nv = 0, nt = 0;
  for (std::size_t i = 0; i < p.masks.liver.size(); ++i) {
    if (p.masks.liver[i] == 0.f) continue;
    if (p.masks.vessel[i] != 0.f) {
      v[0] += p.images.native[i];
      v[1] += p.images.contrast[i];
      ++nv;
    } else {
      t[0] += p.images.native[i];
      t[1] += p.images.contrast[i];
      t2 += p.images.native[i] * p.images.native[i];
      ++nt;
    }
  }
  const double mean_t = t[0] / nt;
  return {v[0] / nv - mean_t, v[1] / nv - t[1] / nt, std::sqrt(t2 / nt - mean_t * mean_t)};
}

}  // namespace

TEST_CASE("tree generation") {
  synth::PhantomConfig c = small_config();
  SUBCASE("zero branch levels give one segment") {
    c.branch_levels = 0;
    CHECK(synth::generate_tree(c, 1).segments.size() == 1);
  }
  SUBCASE("deterministic") {
    const auto a = synth::generate_tree(c, 77), b = synth::generate_tree(c, 77);
    REQUIRE(a.segments.size() == b.segments.size());
    for (std::size_t i = 0; i < a.segments.size(); ++i) {
      CHECK(a.segments[i].a == b.segments[i].a);
      CHECK(a.segments[i].b == b.segments[i].b);
      CHECK(a.segments[i].radius == b.segments[i].radius);
    }
    CHECK(synth::generate_tree(c, 78).segments.front().a != a.segments.front().a);
  }
  SUBCASE("radii follow the decay") {
    c.shape = {96, 96, 64};
    c.root_radius_mm = 12.0;
    c.radius_decay = 0.7;
    c.radius_jitter = 0.0;
    c.branch_levels = 5;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      for (const auto& s : synth::generate_tree(c, seed).segments) {
        CHECK(s.radius == doctest::Approx(12.0 * std::pow(0.7, s.level)));
      }
    }
    CHECK(12.0 * std::pow(0.7, 5) == doctest::Approx(2.0).epsilon(0.01));
  }
  SUBCASE("segments stay inside the liver") {
    const synth::Ellipsoid liver = synth::liver_ellipsoid(c);
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      for (const auto& s : synth::generate_tree(c, seed).segments) {
        CHECK(liver.contains(s.a, -1e-9));
        CHECK(liver.contains(s.b));
      }
    }
  }
}

TEST_CASE("rasterization") {
  synth::PhantomConfig c = small_config();
  SUBCASE("a single segment becomes a cylinder of the right diameter") {
    synth::Tree t;
    t.segments.push_back({{10, 24, 16}, {38, 24, 16}, 3.0, 0});
    const auto m = synth::rasterize({t}, c);
    const Volume d = edt(m.vessel);
    CHECK(std::abs(2.0 * d.at(24, 24, 16) - 6.0) <= 1.0);
    CHECK(m.vessel.at(24, 27, 16) == 1.f);
    CHECK(m.vessel.at(24, 28, 16) == 0.f);
  }
  SUBCASE("vessels lie inside the liver; no trees means no vessels") {
    const auto p = synth::generate_phantom(c, 3);
    for (std::size_t i = 0; i < p.masks.vessel.size(); ++i) {
      if (p.masks.vessel[i] != 0.f) CHECK(p.masks.liver[i] != 0.f);
    }
    CHECK(p.masks.vessel.count_nonzero() > 0);
    CHECK(synth::rasterize({}, c).vessel.count_nonzero() == 0);
  }
}

TEST_CASE("rendered images") {
  synth::PhantomConfig c = small_config();
  SUBCASE("contrast ordering") {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      const Gap g = vessel_gaps(synth::generate_phantom(c, seed));
      CHECK(g.contrast > g.native);
      CHECK(g.native > 0.0);
    }
  }
  SUBCASE("without native contrast vessels are invisible in the source image") {
    c.vessel_contrast.native = 0.0;
    const Gap g = vessel_gaps(synth::generate_phantom(c, 1));
    CHECK(std::abs(g.native) < g.liver_sd_native);
    CHECK(std::abs(g.native) < 0.1 * g.contrast);
  }
  SUBCASE("z-scored and bit-identical across runs") {
    const auto a = synth::generate_phantom(c, 9), b = synth::generate_phantom(c, 9);
    CHECK(std::equal(a.images.native.values().begin(), a.images.native.values().end(), b.images.native.values().begin()));
    CHECK(std::equal(a.images.contrast.values().begin(), a.images.contrast.values().end(),
                     b.images.contrast.values().begin()));
    double s = 0, s2 = 0;
    for (float x : a.images.native.values()) {
      s += x;
      s2 += x * x;
    }
    const double n = static_cast<double>(a.images.native.size());
    CHECK(s / n == doctest::Approx(0.0).epsilon(1e-4).scale(1.0));
    CHECK(s2 / n == doctest::Approx(1.0).epsilon(1e-3));
  }
}

TEST_CASE("default phantoms populate all four thickness groups") {
  const synth::PhantomConfig c;
  for (std::size_t k = 0; k < 2; ++k) {
    const auto p = synth::generate_phantom(c, synth::case_seed(123, k));
    const Volume part = thickness_partition(p.masks.vessel);
    std::array<std::size_t, 4> counts{};
    for (float g : part.values()) {
      if (g >= 0.f) ++counts[static_cast<int>(g)];
    }
    for (std::size_t n : counts) CHECK(n > 0);
  }
}

TEST_CASE("dataset generation") {
  const fs::path root = fs::temp_directory_path() / "auxseg_test_synth";
  fs::remove_all(root);
  synth::PhantomConfig c = small_config();
  c.shape = {24, 24, 16};
  c.root_radius_mm = 3.0;
  c.branch_levels = 2;

  SUBCASE("test-only manifest") {
    const auto m = synth::generate_dataset(0, 0, 1, c, root / "a", VolumeFormat::raw_json);
    REQUIRE(m.records.size() == 1);
    CHECK(m.records[0].role == SampleRole::test);
    CHECK(m.records[0].label.has_value());
    CHECK(m.records[0].seed.has_value());
  }
  SUBCASE("roles, labels and reproducibility") {
    const auto m = synth::generate_dataset(2, 3, 1, c, root / "b", VolumeFormat::nifti);
    REQUIRE(m.records.size() == 6);
    CHECK(m.with_role(SampleRole::triplet).size() == 2);
    CHECK(m.with_role(SampleRole::pair).size() == 3);
    for (const auto* r : m.with_role(SampleRole::pair)) CHECK_FALSE(r->label.has_value());
    synth::generate_dataset(2, 3, 1, c, root / "c", VolumeFormat::nifti);
    for (const auto& entry : fs::directory_iterator(root / "b")) {
      if (entry.path().filename() == "manifest.json") continue;
      CHECK(read_file(entry.path()) == read_file(root / "c" / entry.path().filename()));
    }
    CHECK(read_file(root / "b" / "manifest.json") == read_file(root / "c" / "manifest.json"));
    const auto loaded = load_manifest(root / "b" / "manifest.json");
    CHECK(loaded.records.size() == 6);
    CHECK(*loaded.records[0].seed == synth::case_seed(c.seed, 0));
  }
  fs::remove_all(root);
}

TEST_CASE("phantom config validation") {
  synth::PhantomConfig c;
  c.radius_decay = 1.0;
  CHECK_THROWS_AS(c.validate(), ArgumentError);
  c = {};
  c.shape = {4, 96, 64};
  CHECK_THROWS_AS(c.validate(), ArgumentError);
  c = {};
  c.noise_sigma = -0.1;
  CHECK_THROWS_AS(c.validate(), ArgumentError);
}
