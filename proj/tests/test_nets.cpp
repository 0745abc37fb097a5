#include <chrono>

#include "doctest.h"
#include "support/gradcheck.hpp"

using namespace auxseg;
using namespace auxseg::nn;

namespace {

NetConfig tiny_config(std::uint64_t seed = 1) {
  NetConfig cfg;
  cfg.base_width = 4;
  cfg.groupnorm_groups = 2;
  cfg.levels = 3;
  cfg.init_seed = seed;
  return cfg;
}

Tensor<float> random_input(const Extent3& e, std::uint64_t seed) {
  Tensor<float> t(1, e);
  Rng rng = make_rng({seed});
  std::normal_distribution<float> normal(0.f, 1.f);
  for (auto& v : t.data) v = normal(rng);
  return t;
}

}  // namespace

TEST_CASE("output shapes") {
  const Extent3 e{16, 16, 8};
  const auto unet = build_unet<float>(tiny_config());
  const auto out = predict(unet, random_input(e, 1));
  CHECK(out.logits.channels == 2);
  CHECK(out.logits.extent == e);
  CHECK_FALSE(out.translation.has_value());

  const auto ynet = build_ynet<float>(tiny_config());
  const auto yo = predict(ynet, random_input(e, 1));
  CHECK(yo.logits.channels == 2);
  REQUIRE(yo.translation.has_value());
  CHECK(yo.translation->channels == 1);
  CHECK(yo.translation->extent == e);
}

TEST_CASE("config and input validation") {
  NetConfig cfg = tiny_config();
  cfg.levels = 0;
  CHECK_THROWS_AS(build_unet<float>(cfg), ArgumentError);
  cfg = tiny_config();
  cfg.base_width = 6;
  cfg.groupnorm_groups = 4;
  CHECK_THROWS_AS(build_unet<float>(cfg), ArgumentError);

  const auto m = build_ynet<float>(tiny_config());
  try {
    predict(m, random_input({50, 64, 32}, 2));
    FAIL("expected an error");
  } catch (const ArgumentError& e) {
    CHECK(std::string(e.what()).find("not divisible by 8") != std::string::npos);
  }
}

TEST_CASE("parameter accounting") {
  NetConfig cfg = tiny_config();
  cfg.base_width = 16;
  cfg.groupnorm_groups = 8;
  const auto unet = build_unet<float>(cfg);
  CHECK(count_parameters(unet) == count_parameters(build_unet<float>(cfg)));

  const auto learned = build_ynet<float>(cfg, SigmaMode::learned);
  const auto fixed = build_ynet<float>(cfg, SigmaMode::fixed);
  CHECK(count_parameters(learned) - count_parameters(fixed) == 2);

  const auto b = decompose_parameters(learned);
  CHECK(b.total() == count_parameters(learned));
  CHECK(b.sigmas == 2);
  const auto bu = decompose_parameters(unet);
  CHECK(bu.decoder_trans == 0);
  CHECK(bu.nddr == 0);
  CHECK(bu.sigmas == 0);

  // Y-Net minus U-Net is exactly the translation decoder, the NDDR units,
  // the translation head and the two sigmas.
  const std::size_t trans_head = static_cast<std::size_t>(cfg.width(0)) + 1;
  CHECK(b.encoder == bu.encoder);
  CHECK(b.decoder_seg == bu.decoder_seg);
  CHECK(count_parameters(learned) - count_parameters(unet) == b.decoder_trans + b.nddr + trans_head + b.sigmas);

  // Hand count of one NDDR unit pair at each level: 1x1x1 conv 2w->w + bias + GN affine.
  std::size_t nddr = 0;
  for (int l = 0; l < cfg.levels; ++l) {
    const std::size_t w = cfg.width(l);
    nddr += 2 * (2 * w * w + w + 2 * w);
  }
  CHECK(b.nddr == nddr);
}

TEST_CASE("parameter names are stable and unique") {
  const auto m = build_ynet<float>(tiny_config());
  CHECK(m.has_parameter("encoder.0.conv1.weight"));
  CHECK(m.has_parameter("decoder_trans.2.norm2.bias"));
  CHECK(m.has_parameter("nddr_seg.0.conv.weight"));
  CHECK(m.has_parameter("sigma.log_var_seg"));
  CHECK(m.parameter("encoder.0.conv1.weight").shape == std::vector<int>{4, 1, 3, 3, 3});
  const auto again = build_ynet<float>(tiny_config());
  REQUIRE(again.parameters().size() == m.parameters().size());
  for (std::size_t i = 0; i < m.parameters().size(); ++i) {
    CHECK(m.parameters()[i].name == again.parameters()[i].name);
    CHECK(m.parameters()[i].value == again.parameters()[i].value);
  }
}

TEST_CASE("identity NDDR initialisation") {
  NetConfig cfg = tiny_config();
  cfg.nddr_init = NddrInit::identity;
  const auto m = build_ynet<float>(cfg);
  const auto& w = m.parameter("nddr_trans.1.conv.weight");
  const int width = cfg.width(1);
  for (int o = 0; o < width; ++o) {
    for (int i = 0; i < 2 * width; ++i) {
      const float expected = (i == width + o) ? 1.f : 0.f;
      CHECK(w.value[o * 2 * width + i] == expected);
    }
  }
  for (float v : m.parameter("nddr_seg.1.conv.bias").value) CHECK(v == 0.f);
  const auto& ws = m.parameter("nddr_seg.0.conv.weight");
  CHECK(ws.value[0] == 1.f);
  CHECK(ws.value[cfg.width(0)] == 0.f);
}

TEST_CASE("zero heads give zero outputs") {
  auto m = build_ynet<float>(tiny_config());
  for (auto name : {"head_seg.weight", "head_trans.weight"}) {
    for (auto& v : m.parameter(name).value) v = 0.f;
  }
  const auto out = predict(m, random_input({8, 8, 8}, 3));
  for (float v : out.logits.data) CHECK(v == 0.f);
  for (float v : out.translation->data) CHECK(v == 0.f);
}

TEST_CASE("segmentation output is isolated from the translation branch under identity NDDR") {
  NetConfig cfg = tiny_config();
  cfg.nddr_init = NddrInit::identity;
  const auto m = build_ynet<float>(cfg);
  auto perturbed = m;
  Rng rng = make_rng({99});
  std::normal_distribution<float> normal(0.f, 1.f);
  for (auto& p : perturbed.parameters()) {
    if (p.group == ParamGroup::decoder_trans || p.group == ParamGroup::head_trans) {
      for (auto& v : p.value) v += normal(rng);
    }
  }
  const auto x = random_input({16, 8, 8}, 4);
  const auto a = predict(m, x);
  const auto b = predict(perturbed, x);
  CHECK(a.logits.data == b.logits.data);
  CHECK(a.translation->data != b.translation->data);

  // And the other direction.
  auto seg_perturbed = m;
  for (auto& p : seg_perturbed.parameters()) {
    if (p.group == ParamGroup::decoder_seg || p.group == ParamGroup::head_seg) {
      for (auto& v : p.value) v += normal(rng);
    }
  }
  const auto c = predict(seg_perturbed, x);
  CHECK(a.translation->data == c.translation->data);
}

TEST_CASE("forward is deterministic and the float/double casts agree") {
  const auto m = build_ynet<float>(tiny_config(5));
  const auto x = random_input({8, 8, 16}, 5);
  const auto a = predict(m, x);
  const auto b = predict(m, x);
  CHECK(a.logits.data == b.logits.data);

  const auto md = m.cast<double>();
  Tensor<double> xd(1, x.extent, std::vector<double>(x.data.begin(), x.data.end()));
  const auto d = predict(md, xd);
  double worst = 0.0;
  for (std::size_t i = 0; i < a.logits.size(); ++i) worst = std::max(worst, std::abs(a.logits.data[i] - d.logits.data[i]));
  CHECK(worst < 1e-3);
}

TEST_CASE("sigma modes") {
  auto m = build_ynet<float>(tiny_config());
  CHECK(m.sigma_seg() == doctest::Approx(1.0));
  m.parameter("sigma.log_var_seg").value[0] = static_cast<float>(2.0 * std::log(2.0));
  CHECK(m.sigma_seg() == doctest::Approx(2.0).epsilon(1e-6));
  const auto fixed = m.with_sigma_mode(SigmaMode::fixed);
  CHECK(fixed.sigma_mode() == SigmaMode::fixed);
  CHECK_FALSE(fixed.has_parameter("sigma.log_var_seg"));
  CHECK(fixed.sigma_seg() == doctest::Approx(2.0).epsilon(1e-6));
  CHECK(fixed.parameter("encoder.1.conv2.weight").value == m.parameter("encoder.1.conv2.weight").value);
  const auto back = fixed.with_sigma_mode(SigmaMode::learned);
  CHECK(back.sigma_seg() == doctest::Approx(2.0).epsilon(1e-6));
  CHECK_THROWS_AS(m.set_fixed_sigmas(0.0, 1.0), ArgumentError);
}

TEST_CASE("gradients match central differences") {
  const Extent3 e{8, 8, 8};
  const auto batch = testing::random_batch(e, 11);
  SUBCASE("y-net triplet step") {
    auto m = testing::small_ynet_double(1);
    m.parameter("sigma.log_var_seg").value[0] = 0.3;
    m.parameter("sigma.log_var_trans").value[0] = -0.2;
    const auto r = testing::gradient_check(m, batch, train::StepKind::triplet, 1e-3);
    INFO(r.worst);
    CHECK(r.failures == 0);
    CHECK(r.checked == count_parameters(m));
  }
  SUBCASE("u-net step") {
    const auto m = testing::small_ynet_double(2, Arch::unet);
    const auto r = testing::gradient_check(m, batch, train::StepKind::segmentation, 1e-3);
    INFO(r.worst);
    CHECK(r.failures == 0);
  }
}
