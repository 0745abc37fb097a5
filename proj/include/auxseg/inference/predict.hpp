#pragma once

#include <optional>
#include <span>

#include "auxseg/nets/model.hpp"
#include "auxseg/sampling/patch.hpp"
#include "auxseg/volumes/volume.hpp"

namespace auxseg {

struct PredictionResult {
  Volume segmentation;  // label: argmax of averaged class probabilities
  Volume probability;   // averaged foreground probability
  std::optional<Volume> translation;
};

/// Sliding-window prediction over patch_grid(v.extent(), spec). Softmax
/// probabilities (and the translation output of a Y-Net) are summed into a
/// float buffer and divided by the per-voxel patch count. Ties go to
/// background. `visit_order`, if given, is a permutation of the patch
/// indices. Throws ArgumentError if the patch does not fit the volume or the
/// network.
PredictionResult predict_volume(const nn::Model<float>& model, const Volume& v, const PatchSpec& spec,
                                std::span<const std::size_t> visit_order = {});

/// Per-voxel number of patches covering it.
std::vector<int> coverage_counts(const Extent3& shape, const PatchSpec& spec);

}  // namespace auxseg
