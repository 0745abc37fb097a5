#pragma once

#include <vector>

#include "auxseg/losses/losses.hpp"
#include "auxseg/nets/model.hpp"

namespace auxseg::train {

/// Network inputs and targets for one step. `label` and `auxiliary` are
/// per-voxel arrays matching the source extent; either may be empty.
template <typename T>
struct PatchBatch {
  nn::Tensor<T> source;
  std::vector<float> label;
  std::vector<float> auxiliary;
};

enum class StepKind {
  segmentation,  // cross entropy only (U-Net)
  triplet,       // uncertainty-weighted CE + MSE, all parameters trainable
  pair,          // MSE only; segmentation branch and sigmas frozen
};

/// Loss values and per-parameter gradients (aligned with model.parameters();
/// an empty vector means the parameter receives no update this step).
template <typename T>
struct StepGradients {
  double l_seg = 0.0;
  double l_trans = 0.0;
  double total = 0.0;
  bool has_seg = false;
  bool has_trans = false;
  std::vector<std::vector<T>> grads;
};

/// Current sigmas of a Y-Net as a loss-side SigmaState.
template <typename T>
loss::SigmaState sigma_state(const nn::Model<T>& model);

/// True for parameters that a pair step must leave untouched.
bool frozen_on_pair_step(nn::ParamGroup group);

/// Forward + backward for one batch. Throws Error on a non-finite loss and
/// ArgumentError when the step kind does not fit the model or the batch.
template <typename T>
StepGradients<T> compute_gradients(const nn::Model<T>& model, const PatchBatch<T>& batch, StepKind kind);

/// Losses only, without recording gradients (grads left empty).
template <typename T>
StepGradients<T> evaluate_loss(const nn::Model<T>& model, const PatchBatch<T>& batch, StepKind kind);

}  // namespace auxseg::train
