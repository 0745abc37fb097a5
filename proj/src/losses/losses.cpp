#include "auxseg/losses/losses.hpp"

#include <cmath>

namespace auxseg::loss {

template <typename T>
double cross_entropy(const nn::Tensor<T>& logits, std::span<const float> label, nn::Tensor<T>* grad) {
  if (logits.channels != 2) throw ArgumentError("cross entropy expects 2-channel logits");
  const std::size_t n = logits.voxels();
  if (label.size() != n) throw ArgumentError("cross entropy: label shape does not match logits");
  if (grad) *grad = nn::Tensor<T>(2, logits.extent);
  const T* a = logits.data.data();
  const T* b = a + n;
  const double inv_n = 1.0 / static_cast<double>(n);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double z0 = a[i], z1 = b[i];
    const double m = std::max(z0, z1);
    const double lse = m + std::log(std::exp(z0 - m) + std::exp(z1 - m));
    const bool fg = label[i] >= 0.5f;
    sum += lse - (fg ? z1 : z0);
    if (grad) {
      const double p1 = std::exp(z1 - lse);
      const double p0 = std::exp(z0 - lse);
      grad->data[i] = static_cast<T>((p0 - (fg ? 0.0 : 1.0)) * inv_n);
      grad->data[n + i] = static_cast<T>((p1 - (fg ? 1.0 : 0.0)) * inv_n);
    }
  }
  return sum * inv_n;
}

double cross_entropy(const nn::Tensor<float>& logits, const Volume& label) {
  if (logits.extent != label.extent()) {
    throw ArgumentError("cross entropy: label extent " + to_string(label.extent()) + " does not match logits " +
                        to_string(logits.extent));
  }
  return cross_entropy<float>(logits, label.values());
}

template <typename T>
double mse(const nn::Tensor<T>& pred, std::span<const float> target, nn::Tensor<T>* grad) {
  const std::size_t n = pred.size();
  if (target.size() != n) throw ArgumentError("mse: target shape does not match prediction");
  if (grad) *grad = nn::Tensor<T>(pred.channels, pred.extent);
  const double inv_n = 1.0 / static_cast<double>(n);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = static_cast<double>(pred.data[i]) - target[i];
    sum += d * d;
    if (grad) grad->data[i] = static_cast<T>(2.0 * d * inv_n);
  }
  return sum * inv_n;
}

double mse(const Volume& pred, const Volume& target) {
  if (pred.extent() != target.extent()) throw ArgumentError("mse: shape mismatch");
  const auto p = pred.values();
  const auto t = target.values();
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double d = static_cast<double>(p[i]) - t[i];
    sum += d * d;
  }
  return sum / static_cast<double>(p.size());
}

SigmaState SigmaState::learned(double log_var_seg, double log_var_trans) {
  SigmaState s;
  s.mode = nn::SigmaMode::learned;
  s.s_seg = log_var_seg;
  s.s_trans = log_var_trans;
  return s;
}

SigmaState SigmaState::fixed(double sigma_seg, double sigma_trans) {
  if (!(sigma_seg > 0.0) || !(sigma_trans > 0.0)) throw ArgumentError("fixed sigma must be > 0");
  SigmaState s;
  s.mode = nn::SigmaMode::fixed;
  s.sigma_seg = sigma_seg;
  s.sigma_trans = sigma_trans;
  return s;
}

double SigmaState::seg() const { return mode == nn::SigmaMode::learned ? std::exp(0.5 * s_seg) : sigma_seg; }
double SigmaState::trans() const { return mode == nn::SigmaMode::learned ? std::exp(0.5 * s_trans) : sigma_trans; }

MtlGradient mtl_loss_grad(double l_seg, double l_trans, const SigmaState& sigma) {
  if (!(l_seg >= 0.0) || !(l_trans >= 0.0)) throw ArgumentError("task losses must be non-negative");
  MtlGradient g;
  if (sigma.mode == nn::SigmaMode::learned) {
    const double es = std::exp(-sigma.s_seg), et = std::exp(-sigma.s_trans);
    g.w_seg = 0.5 * es;
    g.w_trans = 0.5 * et;
    g.total = g.w_seg * l_seg + g.w_trans * l_trans + 0.5 * sigma.s_seg + 0.5 * sigma.s_trans;
    g.d_s_seg = -0.5 * es * l_seg + 0.5;
    g.d_s_trans = -0.5 * et * l_trans + 0.5;
  } else {
    if (!(sigma.sigma_seg > 0.0) || !(sigma.sigma_trans > 0.0)) throw ArgumentError("fixed sigma must be > 0");
    g.w_seg = 0.5 / (sigma.sigma_seg * sigma.sigma_seg);
    g.w_trans = 0.5 / (sigma.sigma_trans * sigma.sigma_trans);
    g.total = g.w_seg * l_seg + g.w_trans * l_trans + std::log(sigma.sigma_seg) + std::log(sigma.sigma_trans);
  }
  return g;
}

double mtl_loss(double l_seg, double l_trans, const SigmaState& sigma) {
  return mtl_loss_grad(l_seg, l_trans, sigma).total;
}

double mtl_loss_direct(double l_seg, double l_trans, double sigma_seg, double sigma_trans) {
  if (!(sigma_seg > 0.0) || !(sigma_trans > 0.0)) throw ArgumentError("sigma must be > 0");
  return l_seg / (2.0 * sigma_seg * sigma_seg) + l_trans / (2.0 * sigma_trans * sigma_trans) + std::log(sigma_seg) +
         std::log(sigma_trans);
}

template double cross_entropy<float>(const nn::Tensor<float>&, std::span<const float>, nn::Tensor<float>*);
template double cross_entropy<double>(const nn::Tensor<double>&, std::span<const float>, nn::Tensor<double>*);
template double mse<float>(const nn::Tensor<float>&, std::span<const float>, nn::Tensor<float>*);
template double mse<double>(const nn::Tensor<double>&, std::span<const float>, nn::Tensor<double>*);

}  // namespace auxseg::loss
