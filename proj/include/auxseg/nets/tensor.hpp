#pragma once

#include <span>
#include <vector>

#include "auxseg/common.hpp"

namespace auxseg::nn {

/// Feature map of shape C x X x Y x Z (batch size 1). Channel-major, each
/// channel x-fastest, matching Volume layout.
template <typename T>
struct Tensor {
  int channels = 0;
  Extent3 extent;
  std::vector<T> data;

  Tensor() = default;
  Tensor(int c, const Extent3& e) : channels(c), extent(e), data(static_cast<std::size_t>(c) * e.count(), T(0)) {}
  Tensor(int c, const Extent3& e, std::vector<T> values) : channels(c), extent(e), data(std::move(values)) {
    if (data.size() != static_cast<std::size_t>(c) * e.count()) throw ArgumentError("tensor data size mismatch");
  }

  std::size_t voxels() const { return extent.count(); }
  std::size_t size() const { return data.size(); }
  bool same_shape(const Tensor& o) const { return channels == o.channels && extent == o.extent; }

  std::span<T> channel(int c) { return {data.data() + c * voxels(), voxels()}; }
  std::span<const T> channel(int c) const { return {data.data() + c * voxels(), voxels()}; }
};

}  // namespace auxseg::nn
