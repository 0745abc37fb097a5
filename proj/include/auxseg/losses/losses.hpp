#pragma once

#include <span>

#include "auxseg/nets/model.hpp"
#include "auxseg/volumes/volume.hpp"

namespace auxseg::loss {

/// Mean over voxels of -log softmax(logits)[label]. Logits are 2 x X x Y x Z;
/// `label` holds 0/1 per voxel. When `grad` is given it receives dL/dlogits.
template <typename T>
double cross_entropy(const nn::Tensor<T>& logits, std::span<const float> label, nn::Tensor<T>* grad = nullptr);

double cross_entropy(const nn::Tensor<float>& logits, const Volume& label);

/// Mean squared error over all elements; `grad` receives dL/dpred.
template <typename T>
double mse(const nn::Tensor<T>& pred, std::span<const float> target, nn::Tensor<T>* grad = nullptr);

double mse(const Volume& pred, const Volume& target);

/// Task noise scales. Learned mode stores s = log sigma^2 (sigma > 0 for any
/// real s); fixed mode stores sigma directly.
struct SigmaState {
  nn::SigmaMode mode = nn::SigmaMode::learned;
  double s_seg = 0.0, s_trans = 0.0;          // learned
  double sigma_seg = 1.0, sigma_trans = 1.0;  // fixed

  static SigmaState learned(double log_var_seg, double log_var_trans);
  static SigmaState fixed(double sigma_seg, double sigma_trans);

  double seg() const;
  double trans() const;
};

/// Uncertainty-weighted multi-task loss
///   L = L_S / (2 sigma_S^2) + L_T / (2 sigma_T^2) + log sigma_S + log sigma_T,
/// evaluated as 0.5 e^-s_S L_S + 0.5 e^-s_T L_T + 0.5 s_S + 0.5 s_T in learned mode.
/// Throws ArgumentError for a non-positive fixed sigma or negative task loss.
double mtl_loss(double l_seg, double l_trans, const SigmaState& sigma);

/// The same quantity written directly in terms of sigma.
double mtl_loss_direct(double l_seg, double l_trans, double sigma_seg, double sigma_trans);

struct MtlGradient {
  double total = 0.0;
  double w_seg = 0.0;    // dL/dL_S
  double w_trans = 0.0;  // dL/dL_T
  double d_s_seg = 0.0;  // dL/ds_S (learned mode, else 0)
  double d_s_trans = 0.0;
};

MtlGradient mtl_loss_grad(double l_seg, double l_trans, const SigmaState& sigma);

}  // namespace auxseg::loss
