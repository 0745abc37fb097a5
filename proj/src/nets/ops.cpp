#include "auxseg/nets/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>

namespace auxseg::nn {
namespace {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatrixMap = Eigen::Map<RowMatrix<T>, 0, Eigen::OuterStride<>>;
template <typename T>
using ConstMatrixMap = Eigen::Map<const RowMatrix<T>, 0, Eigen::OuterStride<>>;

// Upper bound on im2col buffer elements per chunk.
constexpr std::size_t kColumnBudget = std::size_t{1} << 22;

int slab_depth(const Extent3& e, std::size_t rows) {
  const std::size_t per_slice = rows * static_cast<std::size_t>(e.x) * static_cast<std::size_t>(e.y);
  const auto depth = static_cast<int>(std::max<std::size_t>(1, kColumnBudget / std::max<std::size_t>(1, per_slice)));
  return std::min(depth, e.z);
}

// Gathers the 27 shifted copies of each input channel for output slices [z0, z1).
template <typename T>
void im2col(const Tensor<T>& in, int z0, int z1, T* col) {
  const Extent3& e = in.extent;
  const int nx = e.x, ny = e.y;
  const std::size_t ncols = static_cast<std::size_t>(nx) * ny * (z1 - z0);
  for (int ci = 0; ci < in.channels; ++ci) {
    const T* src_c = in.data.data() + static_cast<std::size_t>(ci) * in.voxels();
    for (int tap = 0; tap < 27; ++tap) {
      const int dz = tap / 9 - 1, dy = (tap / 3) % 3 - 1, dx = tap % 3 - 1;
      T* row = col + (static_cast<std::size_t>(ci) * 27 + tap) * ncols;
      for (int z = z0; z < z1; ++z) {
        const int zz = z + dz;
        for (int y = 0; y < ny; ++y) {
          T* dst = row + (static_cast<std::size_t>(z - z0) * ny + y) * nx;
          const int yy = y + dy;
          if (zz < 0 || zz >= e.z || yy < 0 || yy >= ny) {
            std::fill(dst, dst + nx, T(0));
            continue;
          }
          const T* src = src_c + (static_cast<std::size_t>(zz) * ny + yy) * nx;
          if (dx == 0) {
            std::copy(src, src + nx, dst);
          } else if (dx < 0) {
            dst[0] = T(0);
            std::copy(src, src + nx - 1, dst + 1);
          } else {
            std::copy(src + 1, src + nx, dst);
            dst[nx - 1] = T(0);
          }
        }
      }
    }
  }
}

// Scatter-adds columns back into the input-gradient tensor (adjoint of im2col).
template <typename T>
void col2im(const T* col, int z0, int z1, Tensor<T>& grad_in) {
  const Extent3& e = grad_in.extent;
  const int nx = e.x, ny = e.y;
  const std::size_t ncols = static_cast<std::size_t>(nx) * ny * (z1 - z0);
  for (int ci = 0; ci < grad_in.channels; ++ci) {
    T* dst_c = grad_in.data.data() + static_cast<std::size_t>(ci) * grad_in.voxels();
    for (int tap = 0; tap < 27; ++tap) {
      const int dz = tap / 9 - 1, dy = (tap / 3) % 3 - 1, dx = tap % 3 - 1;
      const T* row = col + (static_cast<std::size_t>(ci) * 27 + tap) * ncols;
      for (int z = z0; z < z1; ++z) {
        const int zz = z + dz;
        if (zz < 0 || zz >= e.z) continue;
        for (int y = 0; y < ny; ++y) {
          const int yy = y + dy;
          if (yy < 0 || yy >= ny) continue;
          const T* src = row + (static_cast<std::size_t>(z - z0) * ny + y) * nx;
          T* dst = dst_c + (static_cast<std::size_t>(zz) * ny + yy) * nx;
          if (dx == 0) {
            for (int x = 0; x < nx; ++x) dst[x] += src[x];
          } else if (dx < 0) {
            for (int x = 1; x < nx; ++x) dst[x - 1] += src[x];
          } else {
            for (int x = 0; x + 1 < nx; ++x) dst[x + 1] += src[x];
          }
        }
      }
    }
  }
}

}  // namespace

template <typename T>
Tensor<T> conv3d(const Tensor<T>& in, std::span<const T> weight, std::span<const T> bias, int out_channels,
                 int kernel) {
  const std::size_t taps = kernel == 3 ? 27 : 1;
  const auto rows = static_cast<Eigen::Index>(in.channels * taps);
  if (weight.size() != static_cast<std::size_t>(out_channels) * rows) throw ArgumentError("conv weight size mismatch");
  if (bias.size() != static_cast<std::size_t>(out_channels)) throw ArgumentError("conv bias size mismatch");
  Tensor<T> out(out_channels, in.extent);
  const auto n = static_cast<Eigen::Index>(in.voxels());
  const ConstMatrixMap<T> w(weight.data(), out_channels, rows, Eigen::OuterStride<>(rows));

  if (kernel == 1) {
    const ConstMatrixMap<T> x(in.data.data(), in.channels, n, Eigen::OuterStride<>(n));
    MatrixMap<T> y(out.data.data(), out_channels, n, Eigen::OuterStride<>(n));
    y.noalias() = w * x;
  } else {
    const int depth = slab_depth(in.extent, static_cast<std::size_t>(rows));
    const auto slice = static_cast<Eigen::Index>(in.extent.x) * in.extent.y;
    std::vector<T> col(static_cast<std::size_t>(rows) * slice * depth);
    for (int z0 = 0; z0 < in.extent.z; z0 += depth) {
      const int z1 = std::min(z0 + depth, in.extent.z);
      const Eigen::Index ncols = slice * (z1 - z0);
      im2col(in, z0, z1, col.data());
      const ConstMatrixMap<T> c(col.data(), rows, ncols, Eigen::OuterStride<>(ncols));
      MatrixMap<T> y(out.data.data() + slice * z0, out_channels, ncols, Eigen::OuterStride<>(n));
      y.noalias() = w * c;
    }
  }
  for (int co = 0; co < out_channels; ++co) {
    const T b = bias[co];
    for (T& v : out.channel(co)) v += b;
  }
  return out;
}

template <typename T>
void conv3d_backward(const Tensor<T>& in, std::span<const T> weight, int kernel, const Tensor<T>& grad_out,
                     Tensor<T>* grad_in, std::span<T> grad_weight, std::span<T> grad_bias) {
  const int out_channels = grad_out.channels;
  const std::size_t taps = kernel == 3 ? 27 : 1;
  const auto rows = static_cast<Eigen::Index>(in.channels * taps);
  const auto n = static_cast<Eigen::Index>(in.voxels());
  const ConstMatrixMap<T> w(weight.data(), out_channels, rows, Eigen::OuterStride<>(rows));

  if (!grad_bias.empty()) {
    for (int co = 0; co < out_channels; ++co) {
      T sum = T(0);
      for (T v : grad_out.channel(co)) sum += v;
      grad_bias[co] += sum;
    }
  }
  const bool want_weight = !grad_weight.empty();
  if (kernel == 1) {
    const ConstMatrixMap<T> x(in.data.data(), in.channels, n, Eigen::OuterStride<>(n));
    const ConstMatrixMap<T> dy(grad_out.data.data(), out_channels, n, Eigen::OuterStride<>(n));
    if (want_weight) {
      MatrixMap<T> dw(grad_weight.data(), out_channels, rows, Eigen::OuterStride<>(rows));
      dw.noalias() += dy * x.transpose();
    }
    if (grad_in != nullptr) {
      MatrixMap<T> dx(grad_in->data.data(), in.channels, n, Eigen::OuterStride<>(n));
      dx.noalias() += w.transpose() * dy;
    }
    return;
  }
  if (!want_weight && grad_in == nullptr) return;

  const int depth = slab_depth(in.extent, static_cast<std::size_t>(rows));
  const auto slice = static_cast<Eigen::Index>(in.extent.x) * in.extent.y;
  std::vector<T> col(static_cast<std::size_t>(rows) * slice * depth);
  for (int z0 = 0; z0 < in.extent.z; z0 += depth) {
    const int z1 = std::min(z0 + depth, in.extent.z);
    const Eigen::Index ncols = slice * (z1 - z0);
    const ConstMatrixMap<T> dy(grad_out.data.data() + slice * z0, out_channels, ncols, Eigen::OuterStride<>(n));
    if (want_weight) {
      im2col(in, z0, z1, col.data());
      const ConstMatrixMap<T> c(col.data(), rows, ncols, Eigen::OuterStride<>(ncols));
      MatrixMap<T> dw(grad_weight.data(), out_channels, rows, Eigen::OuterStride<>(rows));
      dw.noalias() += dy * c.transpose();
    }
    if (grad_in != nullptr) {
      MatrixMap<T> dc(col.data(), rows, ncols, Eigen::OuterStride<>(ncols));
      dc.noalias() = w.transpose() * dy;
      col2im(col.data(), z0, z1, *grad_in);
    }
  }
}

template <typename T>
Tensor<T> group_norm(const Tensor<T>& in, std::span<const T> gamma, std::span<const T> beta, int groups,
                     GroupNormStats<T>& stats) {
  if (groups < 1 || in.channels % groups != 0) throw ArgumentError("group norm: channels not divisible by groups");
  const int per_group = in.channels / groups;
  const std::size_t n = in.voxels();
  const auto count = static_cast<double>(n * per_group);
  constexpr double eps = 1e-5;
  stats.mean.assign(groups, T(0));
  stats.inv_std.assign(groups, T(0));
  Tensor<T> out(in.channels, in.extent);
  for (int g = 0; g < groups; ++g) {
    double sum = 0.0;
    for (int c = g * per_group; c < (g + 1) * per_group; ++c) {
      for (T v : in.channel(c)) sum += v;
    }
    const double mean = sum / count;
    double ss = 0.0;
    for (int c = g * per_group; c < (g + 1) * per_group; ++c) {
      for (T v : in.channel(c)) ss += (v - mean) * (v - mean);
    }
    const double inv_std = 1.0 / std::sqrt(ss / count + eps);
    stats.mean[g] = static_cast<T>(mean);
    stats.inv_std[g] = static_cast<T>(inv_std);
    for (int c = g * per_group; c < (g + 1) * per_group; ++c) {
      const T scale = static_cast<T>(gamma[c] * inv_std);
      const T shift = static_cast<T>(beta[c] - gamma[c] * mean * inv_std);
      auto src = in.channel(c);
      auto dst = out.channel(c);
      for (std::size_t i = 0; i < n; ++i) dst[i] = src[i] * scale + shift;
    }
  }
  return out;
}

template <typename T>
void group_norm_backward(const Tensor<T>& in, std::span<const T> gamma, int groups, const GroupNormStats<T>& stats,
                         const Tensor<T>& grad_out, Tensor<T>* grad_in, std::span<T> grad_gamma,
                         std::span<T> grad_beta) {
  const int per_group = in.channels / groups;
  const std::size_t n = in.voxels();
  const auto count = static_cast<double>(n * per_group);
  for (int g = 0; g < groups; ++g) {
    const double mean = stats.mean[g];
    const double inv_std = stats.inv_std[g];
    double sum_dxhat = 0.0;
    double sum_dxhat_xhat = 0.0;
    for (int c = g * per_group; c < (g + 1) * per_group; ++c) {
      auto x = in.channel(c);
      auto dy = grad_out.channel(c);
      double dgamma = 0.0, dbeta = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double xhat = (x[i] - mean) * inv_std;
        dgamma += dy[i] * xhat;
        dbeta += dy[i];
      }
      if (!grad_gamma.empty()) grad_gamma[c] += static_cast<T>(dgamma);
      if (!grad_beta.empty()) grad_beta[c] += static_cast<T>(dbeta);
      sum_dxhat += gamma[c] * dbeta;
      sum_dxhat_xhat += gamma[c] * dgamma;
    }
    if (grad_in == nullptr) continue;
    const double a = sum_dxhat / count;
    const double b = sum_dxhat_xhat / count;
    for (int c = g * per_group; c < (g + 1) * per_group; ++c) {
      auto x = in.channel(c);
      auto dy = grad_out.channel(c);
      auto dx = grad_in->channel(c);
      const double gm = gamma[c];
      for (std::size_t i = 0; i < n; ++i) {
        const double xhat = (x[i] - mean) * inv_std;
        dx[i] += static_cast<T>(inv_std * (gm * dy[i] - a - xhat * b));
      }
    }
  }
}

template <typename T>
Tensor<T> relu(const Tensor<T>& in) {
  Tensor<T> out(in.channels, in.extent);
  for (std::size_t i = 0; i < in.size(); ++i) out.data[i] = in.data[i] > T(0) ? in.data[i] : T(0);
  return out;
}

template <typename T>
void relu_backward(const Tensor<T>& out, const Tensor<T>& grad_out, Tensor<T>& grad_in) {
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (out.data[i] > T(0)) grad_in.data[i] += grad_out.data[i];
  }
}

template <typename T>
Tensor<T> max_pool2(const Tensor<T>& in, std::vector<std::uint8_t>& argmax) {
  const Extent3& e = in.extent;
  if (e.x % 2 || e.y % 2 || e.z % 2) throw ArgumentError("max pool needs even extent, got " + to_string(e));
  const Extent3 h{e.x / 2, e.y / 2, e.z / 2};
  Tensor<T> out(in.channels, h);
  argmax.assign(out.size(), 0);
  for (int c = 0; c < in.channels; ++c) {
    auto src = in.channel(c);
    auto dst = out.channel(c);
    std::uint8_t* arg = argmax.data() + static_cast<std::size_t>(c) * h.count();
    for (int k = 0; k < h.z; ++k) {
      for (int j = 0; j < h.y; ++j) {
        for (int i = 0; i < h.x; ++i) {
          T best = src[e.index(2 * i, 2 * j, 2 * k)];
          std::uint8_t best_at = 0;
          for (std::uint8_t o = 1; o < 8; ++o) {
            const T v = src[e.index(2 * i + (o & 1), 2 * j + ((o >> 1) & 1), 2 * k + ((o >> 2) & 1))];
            if (v > best) {
              best = v;
              best_at = o;
            }
          }
          const std::size_t idx = h.index(i, j, k);
          dst[idx] = best;
          arg[idx] = best_at;
        }
      }
    }
  }
  return out;
}

template <typename T>
void max_pool2_backward(const Tensor<T>& grad_out, const std::vector<std::uint8_t>& argmax, Tensor<T>& grad_in) {
  const Extent3& h = grad_out.extent;
  const Extent3& e = grad_in.extent;
  for (int c = 0; c < grad_out.channels; ++c) {
    auto dy = grad_out.channel(c);
    auto dx = grad_in.channel(c);
    const std::uint8_t* arg = argmax.data() + static_cast<std::size_t>(c) * h.count();
    for (int k = 0; k < h.z; ++k) {
      for (int j = 0; j < h.y; ++j) {
        for (int i = 0; i < h.x; ++i) {
          const std::size_t idx = h.index(i, j, k);
          const std::uint8_t o = arg[idx];
          dx[e.index(2 * i + (o & 1), 2 * j + ((o >> 1) & 1), 2 * k + ((o >> 2) & 1))] += dy[idx];
        }
      }
    }
  }
}

template <typename T>
Tensor<T> upsample2(const Tensor<T>& in) {
  const Extent3& h = in.extent;
  const Extent3 e{h.x * 2, h.y * 2, h.z * 2};
  Tensor<T> out(in.channels, e);
  for (int c = 0; c < in.channels; ++c) {
    auto src = in.channel(c);
    auto dst = out.channel(c);
    for (int k = 0; k < e.z; ++k) {
      for (int j = 0; j < e.y; ++j) {
        const T* row = src.data() + h.index(0, j / 2, k / 2);
        T* out_row = dst.data() + e.index(0, j, k);
        for (int i = 0; i < e.x; ++i) out_row[i] = row[i / 2];
      }
    }
  }
  return out;
}

template <typename T>
void upsample2_backward(const Tensor<T>& grad_out, Tensor<T>& grad_in) {
  const Extent3& e = grad_out.extent;
  const Extent3& h = grad_in.extent;
  for (int c = 0; c < grad_out.channels; ++c) {
    auto dy = grad_out.channel(c);
    auto dx = grad_in.channel(c);
    for (int k = 0; k < e.z; ++k) {
      for (int j = 0; j < e.y; ++j) {
        const T* row = dy.data() + e.index(0, j, k);
        T* out_row = dx.data() + h.index(0, j / 2, k / 2);
        for (int i = 0; i < e.x; ++i) out_row[i / 2] += row[i];
      }
    }
  }
}

template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  if (!(a.extent == b.extent)) throw ArgumentError("concat: extent mismatch");
  Tensor<T> out(a.channels + b.channels, a.extent);
  std::copy(a.data.begin(), a.data.end(), out.data.begin());
  std::copy(b.data.begin(), b.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(a.size()));
  return out;
}

#define AUXSEG_INSTANTIATE_OPS(T)                                                                                  \
  template Tensor<T> conv3d<T>(const Tensor<T>&, std::span<const T>, std::span<const T>, int, int);                \
  template void conv3d_backward<T>(const Tensor<T>&, std::span<const T>, int, const Tensor<T>&, Tensor<T>*,        \
                                   std::span<T>, std::span<T>);                                                    \
  template Tensor<T> group_norm<T>(const Tensor<T>&, std::span<const T>, std::span<const T>, int,                  \
                                   GroupNormStats<T>&);                                                            \
  template void group_norm_backward<T>(const Tensor<T>&, std::span<const T>, int, const GroupNormStats<T>&,        \
                                       const Tensor<T>&, Tensor<T>*, std::span<T>, std::span<T>);                  \
  template Tensor<T> relu<T>(const Tensor<T>&);                                                                    \
  template void relu_backward<T>(const Tensor<T>&, const Tensor<T>&, Tensor<T>&);                                  \
  template Tensor<T> max_pool2<T>(const Tensor<T>&, std::vector<std::uint8_t>&);                                   \
  template void max_pool2_backward<T>(const Tensor<T>&, const std::vector<std::uint8_t>&, Tensor<T>&);             \
  template Tensor<T> upsample2<T>(const Tensor<T>&);                                                               \
  template void upsample2_backward<T>(const Tensor<T>&, Tensor<T>&);                                               \
  template Tensor<T> concat_channels<T>(const Tensor<T>&, const Tensor<T>&);

AUXSEG_INSTANTIATE_OPS(float)
AUXSEG_INSTANTIATE_OPS(double)

#undef AUXSEG_INSTANTIATE_OPS

}  // namespace auxseg::nn
