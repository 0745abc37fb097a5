#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "auxseg/nets/tensor.hpp"

namespace auxseg::nn {

// Primitive kernels with explicit backward passes. Convolutions use
// zero "same" padding and stride 1; kernel size is 1 or 3. Weights are laid
// out [out][in][kz][ky][kx].

template <typename T>
Tensor<T> conv3d(const Tensor<T>& in, std::span<const T> weight, std::span<const T> bias, int out_channels, int kernel);

/// Accumulates into grad_weight / grad_bias (when non-empty) and writes
/// grad_in (when non-null, accumulating).
template <typename T>
void conv3d_backward(const Tensor<T>& in, std::span<const T> weight, int kernel, const Tensor<T>& grad_out,
                     Tensor<T>* grad_in, std::span<T> grad_weight, std::span<T> grad_bias);

template <typename T>
struct GroupNormStats {
  std::vector<T> mean;
  std::vector<T> inv_std;
};

template <typename T>
Tensor<T> group_norm(const Tensor<T>& in, std::span<const T> gamma, std::span<const T> beta, int groups,
                     GroupNormStats<T>& stats);

template <typename T>
void group_norm_backward(const Tensor<T>& in, std::span<const T> gamma, int groups, const GroupNormStats<T>& stats,
                         const Tensor<T>& grad_out, Tensor<T>* grad_in, std::span<T> grad_gamma,
                         std::span<T> grad_beta);

template <typename T>
Tensor<T> relu(const Tensor<T>& in);

template <typename T>
void relu_backward(const Tensor<T>& out, const Tensor<T>& grad_out, Tensor<T>& grad_in);

/// 2x2x2 max pooling; `argmax` receives the winning offset (0..7) per output.
template <typename T>
Tensor<T> max_pool2(const Tensor<T>& in, std::vector<std::uint8_t>& argmax);

template <typename T>
void max_pool2_backward(const Tensor<T>& grad_out, const std::vector<std::uint8_t>& argmax, Tensor<T>& grad_in);

/// Nearest-neighbour 2x upsampling.
template <typename T>
Tensor<T> upsample2(const Tensor<T>& in);

template <typename T>
void upsample2_backward(const Tensor<T>& grad_out, Tensor<T>& grad_in);

template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b);

}  // namespace auxseg::nn
