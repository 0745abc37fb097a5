#include "auxseg/inference/predict.hpp"

#include <algorithm>
#include <cmath>

namespace auxseg {

namespace {

// Adds `patch` (size.count() values) into the sum buffer at `origin`.
void accumulate(std::span<float> sum, const Extent3& shape, const Index3& origin, const Extent3& size,
                std::span<const float> patch) {
  std::size_t src = 0;
  for (int k = 0; k < size.z; ++k) {
    for (int j = 0; j < size.y; ++j) {
      float* dst = sum.data() + shape.index(origin.x, origin.y + j, origin.z + k);
      for (int i = 0; i < size.x; ++i) dst[i] += patch[src++];
    }
  }
}

}  // namespace

std::vector<int> coverage_counts(const Extent3& shape, const PatchSpec& spec) {
  std::vector<int> cover(shape.count(), 0);
  const Extent3& size = spec.patch_size;
  for (const Index3& o : patch_grid(shape, spec)) {
    for (int k = 0; k < size.z; ++k) {
      for (int j = 0; j < size.y; ++j) {
        int* dst = cover.data() + shape.index(o.x, o.y + j, o.z + k);
        for (int i = 0; i < size.x; ++i) ++dst[i];
      }
    }
  }
  return cover;
}

PredictionResult predict_volume(const nn::Model<float>& model, const Volume& v, const PatchSpec& spec,
                                std::span<const std::size_t> visit_order) {
  spec.validate();
  const Extent3 shape = v.extent();
  const Extent3 size = spec.patch_size;
  for (int a = 0; a < 3; ++a) {
    if (size[a] > shape[a]) {
      throw ArgumentError("patch " + to_string(size) + " does not fit volume " + to_string(shape));
    }
  }
  nn::check_input_extent(model.config(), size);
  if (model.config().seg_classes != 2) throw ArgumentError("inference expects a 2-class segmentation head");

  const auto origins = patch_grid(shape, spec);
  std::vector<std::size_t> order(origins.size());
  if (visit_order.empty()) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  } else {
    if (visit_order.size() != origins.size()) throw ArgumentError("visit order must list every patch once");
    std::vector<bool> seen(origins.size(), false);
    for (std::size_t i = 0; i < order.size(); ++i) {
      if (visit_order[i] >= origins.size() || seen[visit_order[i]]) {
        throw ArgumentError("visit order is not a permutation");
      }
      seen[visit_order[i]] = true;
      order[i] = visit_order[i];
    }
  }

  const bool ynet = model.arch() == nn::Arch::ynet;
  const std::size_t n = shape.count();
  const std::size_t pn = size.count();
  std::vector<float> sum0(n, 0.f), sum1(n, 0.f), sum_t(ynet ? n : 0, 0.f);
  std::vector<float> p0(pn), p1(pn);
  nn::Tensor<float> input(1, size);

  for (const std::size_t idx : order) {
    const Index3& o = origins[idx];
    extract_region(v.values(), shape, o, size, input.data);
    const nn::Outputs<float> out = nn::predict(model, input);
    const auto z0 = out.logits.channel(0);
    const auto z1 = out.logits.channel(1);
    for (std::size_t i = 0; i < pn; ++i) {
      const float m = std::max(z0[i], z1[i]);
      const float e0 = std::exp(z0[i] - m), e1 = std::exp(z1[i] - m);
      const float s = e0 + e1;
      p0[i] = e0 / s;
      p1[i] = e1 / s;
    }
    accumulate(sum0, shape, o, size, p0);
    accumulate(sum1, shape, o, size, p1);
    if (ynet) accumulate(sum_t, shape, o, size, out.translation->channel(0));
  }

  const std::vector<int> cover = coverage_counts(shape, spec);
  std::vector<float> prob(n), label(n), trans;
  for (std::size_t i = 0; i < n; ++i) {
    const float c = static_cast<float>(cover[i]);
    const float a0 = sum0[i] / c, a1 = sum1[i] / c;
    prob[i] = std::clamp(a1, 0.f, 1.f);
    label[i] = a1 > a0 ? 1.f : 0.f;
  }
  if (ynet) {
    trans.resize(n);
    for (std::size_t i = 0; i < n; ++i) trans[i] = sum_t[i] / static_cast<float>(cover[i]);
  }

  PredictionResult r{v.with_values(std::move(label), VolumeKind::label),
                     v.with_values(std::move(prob), VolumeKind::probability), std::nullopt};
  if (ynet) r.translation = v.with_values(std::move(trans), VolumeKind::intensity);
  return r;
}

}  // namespace auxseg
