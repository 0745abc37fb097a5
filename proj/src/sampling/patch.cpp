#include "auxseg/sampling/patch.hpp"

#include <algorithm>

namespace auxseg {

void PatchSpec::validate() const {
  for (int a = 0; a < 3; ++a) {
    if (patch_size[a] < 1) throw ArgumentError("patch size must be >= 1");
    if (stride[a] < 1 || stride[a] > patch_size[a]) {
      throw ArgumentError("patch stride must satisfy 1 <= stride <= patch size, got stride " + to_string(stride) +
                          " for patch " + to_string(patch_size));
    }
  }
}

std::vector<int> axis_origins(int length, int patch, int stride) {
  if (patch > length) {
    throw ArgumentError("patch of " + std::to_string(patch) + " voxels does not fit an axis of " +
                        std::to_string(length));
  }
  std::vector<int> out;
  for (int o = 0;; o += stride) {
    if (o + patch >= length) {
      out.push_back(length - patch);
      break;
    }
    out.push_back(o);
  }
  return out;
}

std::vector<Index3> patch_grid(const Extent3& shape, const PatchSpec& spec) {
  spec.validate();
  const auto xs = axis_origins(shape.x, spec.patch_size.x, spec.stride.x);
  const auto ys = axis_origins(shape.y, spec.patch_size.y, spec.stride.y);
  const auto zs = axis_origins(shape.z, spec.patch_size.z, spec.stride.z);
  std::vector<Index3> out;
  out.reserve(xs.size() * ys.size() * zs.size());
  for (int z : zs) {
    for (int y : ys) {
      for (int x : xs) out.push_back({x, y, z});
    }
  }
  return out;
}

void extract_region(std::span<const float> values, const Extent3& extent, const Index3& origin, const Extent3& size,
                    std::span<float> out) {
  for (int a = 0; a < 3; ++a) {
    if (origin[a] < 0 || size[a] < 1 || origin[a] + size[a] > extent[a]) {
      throw ArgumentError("patch at " + to_string(origin) + " of size " + to_string(size) +
                          " is out of bounds for extent " + to_string(extent));
    }
  }
  if (out.size() != size.count()) throw ArgumentError("patch output buffer has wrong size");
  for (int k = 0; k < size.z; ++k) {
    for (int j = 0; j < size.y; ++j) {
      const float* src = values.data() + extent.index(origin.x, origin.y + j, origin.z + k);
      std::copy(src, src + size.x, out.data() + size.index(0, j, k));
    }
  }
}

Volume extract_patch(const Volume& v, const Index3& origin, const Extent3& size) {
  std::vector<float> out(size.count());
  extract_region(v.values(), v.extent(), origin, size, out);
  Geometry g = v.geometry();
  g.extent = size;
  for (int a = 0; a < 3; ++a) g.origin[a] += origin[a] * g.spacing[a];
  return Volume(g, std::move(out), v.kind());
}

}  // namespace auxseg
