#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <doctest.h>

#include "auxseg/inference/predict.hpp"
#include "auxseg/random.hpp"

using namespace auxseg;

namespace {

nn::NetConfig tiny_config() {
  nn::NetConfig cfg;
  cfg.base_width = 4;
  cfg.groupnorm_groups = 2;
  cfg.levels = 2;
  cfg.init_seed = 3;
  return cfg;
}

Volume random_image(const Extent3& e, std::uint64_t seed) {
  Rng rng = make_rng({seed});
  std::normal_distribution<float> normal(0.f, 1.f);
  std::vector<float> v(e.count());
  for (float& x : v) x = normal(rng);
  return Volume({e}, std::move(v), VolumeKind::intensity);
}

}  // namespace

TEST_CASE("a single covering patch reproduces the direct forward pass") {
  const auto model = nn::build_ynet<float>(tiny_config());
  const Volume v = random_image({8, 8, 8}, 1);
  const PredictionResult r = predict_volume(model, v, {{8, 8, 8}, {8, 8, 8}});
  const auto out = nn::predict(model, nn::Tensor<float>(1, v.extent(), v.copy_values()));
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double z0 = out.logits.data[i], z1 = out.logits.data[v.size() + i];
    const double p1 = 1.0 / (1.0 + std::exp(z0 - z1));
    CHECK(r.probability[i] == doctest::Approx(p1).epsilon(1e-5));
    CHECK(r.segmentation[i] == (p1 > 0.5 ? 1.f : 0.f));
    CHECK((*r.translation)[i] == doctest::Approx(out.translation->data[i]).epsilon(1e-5));
  }
  CHECK(r.segmentation.kind() == VolumeKind::label);
  CHECK(r.probability.kind() == VolumeKind::probability);
}

TEST_CASE("patch visiting order does not change the result") {
  const auto model = nn::build_ynet<float>(tiny_config());
  const Volume v = random_image({12, 10, 8}, 2);
  const PatchSpec spec{{8, 8, 4}, {3, 2, 3}};
  const PredictionResult a = predict_volume(model, v, spec);
  std::vector<std::size_t> order(patch_grid(v.extent(), spec).size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937 rng(5);
  std::shuffle(order.begin(), order.end(), rng);
  const PredictionResult b = predict_volume(model, v, spec, order);
  for (std::size_t i = 0; i < v.size(); ++i) {
    CHECK(std::abs(a.probability[i] - b.probability[i]) < 1e-6);
    CHECK(std::abs((*a.translation)[i] - (*b.translation)[i]) < 1e-5);
  }
  std::vector<std::size_t> bad(order.size(), 0);
  CHECK_THROWS_AS(predict_volume(model, v, spec, bad), ArgumentError);
}

TEST_CASE("averaging uses the coverage count") {
  const Extent3 shape{10, 9, 8};
  const PatchSpec spec{{4, 4, 4}, {3, 2, 4}};
  const auto cover = coverage_counts(shape, spec);
  CHECK(*std::min_element(cover.begin(), cover.end()) >= 1);
  // x origins 0,3,6: voxel x=3 is covered twice along x; y origins 0,2,4,5: y=5 three times.
  CHECK(cover[shape.index(3, 5, 0)] == 6);
  CHECK(cover[shape.index(0, 0, 0)] == 1);

  // A U-Net with zeroed heads predicts 0.5 everywhere no matter how many patches overlap.
  auto model = nn::build_unet<float>(tiny_config());
  for (auto& p : model.parameters()) {
    if (p.group == nn::ParamGroup::head_seg) std::fill(p.value.begin(), p.value.end(), 0.f);
  }
  const PredictionResult r = predict_volume(model, random_image(shape, 4), spec);
  for (float p : r.probability.values()) CHECK(p == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(r.segmentation.count_nonzero() == 0);
  CHECK_FALSE(r.translation.has_value());
}

TEST_CASE("unusable patch sizes") {
  const auto model = nn::build_unet<float>(tiny_config());
  const Volume v = random_image({8, 8, 8}, 6);
  CHECK_THROWS_AS(predict_volume(model, v, {{12, 8, 8}, {4, 4, 4}}), ArgumentError);
  CHECK_THROWS_AS(predict_volume(model, v, {{6, 8, 8}, {2, 4, 4}}), ArgumentError);
}
