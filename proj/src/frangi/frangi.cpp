#include "auxseg/frangi/frangi.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include <Eigen/Dense>
#include <spdlog/spdlog.h>

namespace auxseg {

void FrangiParams::validate() const {
  if (scales_mm.empty()) throw ArgumentError("Frangi needs at least one scale");
  for (double s : scales_mm) {
    if (!(s > 0.0)) throw ArgumentError("Frangi scales must be > 0");
  }
  if (!(alpha > 0.0) || !(beta > 0.0)) throw ArgumentError("Frangi alpha and beta must be > 0");
  if (c && !(*c > 0.0)) throw ArgumentError("Frangi c must be > 0");
}

namespace {

void smooth_axis(std::vector<float>& data, const Extent3& e, int axis, double sigma_vox) {
  if (sigma_vox <= 0.0) return;
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma_vox)));
  std::vector<double> kernel(2 * radius + 1);
  double sum = 0.0;
  for (int t = -radius; t <= radius; ++t) sum += kernel[t + radius] = std::exp(-0.5 * t * t / (sigma_vox * sigma_vox));
  for (double& w : kernel) w /= sum;

  const int n = e[axis];
  const std::size_t stride = axis == 0 ? 1 : axis == 1 ? static_cast<std::size_t>(e.x)
                                                       : static_cast<std::size_t>(e.x) * e.y;
  std::vector<double> line(n);
  const int a1 = axis == 0 ? 1 : 0, a2 = axis == 2 ? 1 : 2;
  for (int v = 0; v < e[a2]; ++v) {
    for (int u = 0; u < e[a1]; ++u) {
      std::array<int, 3> pos{0, 0, 0};
      pos[a1] = u;
      pos[a2] = v;
      const std::size_t base = e.index(pos[0], pos[1], pos[2]);
      for (int i = 0; i < n; ++i) line[i] = data[base + i * stride];
      for (int i = 0; i < n; ++i) {
        double acc = 0.0;
        for (int t = -radius; t <= radius; ++t) acc += kernel[t + radius] * line[std::clamp(i + t, 0, n - 1)];
        data[base + i * stride] = static_cast<float>(acc);
      }
    }
  }
}

}  // namespace

Volume gaussian_smooth(const Volume& v, double sigma_mm) {
  std::vector<float> data = v.copy_values();
  for (int a = 0; a < 3; ++a) smooth_axis(data, v.extent(), a, sigma_mm / v.spacing()[a]);
  return v.with_values(std::move(data), VolumeKind::intensity);
}

Volume frangi_single_scale(const Volume& v, double s, const FrangiParams& p, double* c_used) {
  p.validate();
  const Extent3& e = v.extent();
  const Volume g = gaussian_smooth(v, s);
  const Vec3& h = v.spacing();
  auto at = [&](int i, int j, int k) {
    return static_cast<double>(g.at(std::clamp(i, 0, e.x - 1), std::clamp(j, 0, e.y - 1), std::clamp(k, 0, e.z - 1)));
  };

  std::vector<std::array<float, 3>> eig(e.count());
  std::vector<float> norm(e.count());
  double max_norm = 0.0;
  const double scale2 = s * s;
  for (int k = 0; k < e.z; ++k)
    for (int j = 0; j < e.y; ++j)
      for (int i = 0; i < e.x; ++i) {
        const double c0 = at(i, j, k);
        Eigen::Matrix3d H;
        H(0, 0) = (at(i + 1, j, k) - 2 * c0 + at(i - 1, j, k)) / (h[0] * h[0]);
        H(1, 1) = (at(i, j + 1, k) - 2 * c0 + at(i, j - 1, k)) / (h[1] * h[1]);
        H(2, 2) = (at(i, j, k + 1) - 2 * c0 + at(i, j, k - 1)) / (h[2] * h[2]);
        H(0, 1) = H(1, 0) = (at(i + 1, j + 1, k) - at(i + 1, j - 1, k) - at(i - 1, j + 1, k) + at(i - 1, j - 1, k)) /
                            (4 * h[0] * h[1]);
        H(0, 2) = H(2, 0) = (at(i + 1, j, k + 1) - at(i + 1, j, k - 1) - at(i - 1, j, k + 1) + at(i - 1, j, k - 1)) /
                            (4 * h[0] * h[2]);
        H(1, 2) = H(2, 1) = (at(i, j + 1, k + 1) - at(i, j + 1, k - 1) - at(i, j - 1, k + 1) + at(i, j - 1, k - 1)) /
                            (4 * h[1] * h[2]);
        H *= scale2;
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver;
        solver.computeDirect(H, Eigen::EigenvaluesOnly);
        std::array<double, 3> l{solver.eigenvalues()[0], solver.eigenvalues()[1], solver.eigenvalues()[2]};
        std::sort(l.begin(), l.end(), [](double a, double b) { return std::abs(a) < std::abs(b); });
        const std::size_t idx = e.index(i, j, k);
        eig[idx] = {static_cast<float>(l[0]), static_cast<float>(l[1]), static_cast<float>(l[2])};
        const double sn = std::sqrt(l[0] * l[0] + l[1] * l[1] + l[2] * l[2]);
        norm[idx] = static_cast<float>(sn);
        max_norm = std::max(max_norm, sn);
      }

  const double c = p.c ? *p.c : 0.5 * max_norm;
  if (c_used) *c_used = c;
  std::vector<float> out(e.count(), 0.f);
  if (c <= 0.0) return v.with_values(std::move(out), VolumeKind::probability);
  const double a2 = 2 * p.alpha * p.alpha, b2 = 2 * p.beta * p.beta, c2 = 2 * c * c;
  for (std::size_t idx = 0; idx < e.count(); ++idx) {
    const double l1 = eig[idx][0], l2 = eig[idx][1], l3 = eig[idx][2];
    const bool wrong_sign = p.bright_on_dark ? (l2 > 0 || l3 > 0) : (l2 < 0 || l3 < 0);
    if (wrong_sign || l2 == 0.0 || l3 == 0.0) continue;
    const double ra = std::abs(l2) / std::abs(l3);
    const double rb = std::abs(l1) / std::sqrt(std::abs(l2 * l3));
    const double sn = norm[idx];
    const double value = (1 - std::exp(-ra * ra / a2)) * std::exp(-rb * rb / b2) * (1 - std::exp(-sn * sn / c2));
    out[idx] = static_cast<float>(std::clamp(value, 0.0, 1.0));
  }
  return v.with_values(std::move(out), VolumeKind::probability);
}

Volume frangi_vesselness(const Volume& v, const FrangiParams& p) {
  p.validate();
  std::vector<float> best(v.size(), 0.f);
  for (double s : p.scales_mm) {
    const Volume r = frangi_single_scale(v, s, p);
    for (std::size_t i = 0; i < best.size(); ++i) best[i] = std::max(best[i], r[i]);
  }
  return v.with_values(std::move(best), VolumeKind::probability);
}

double otsu_between_class_variance(std::span<const double> hist, int t) {
  double w0 = 0, s0 = 0, w1 = 0, s1 = 0;
  for (int b = 0; b < static_cast<int>(hist.size()); ++b) {
    if (b <= t) {
      w0 += hist[b];
      s0 += hist[b] * b;
    } else {
      w1 += hist[b];
      s1 += hist[b] * b;
    }
  }
  if (w0 == 0 || w1 == 0) return 0.0;
  const double total = w0 + w1;
  const double d = s0 / w0 - s1 / w1;
  return (w0 / total) * (w1 / total) * d * d;
}

double otsu_threshold(std::span<const float> values) {
  if (values.empty()) throw ArgumentError("Otsu threshold of an empty volume");
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it, hi = *hi_it;
  if (!(hi > lo)) throw ArgumentError("Otsu threshold undefined for a constant volume");
  constexpr int kBins = 256;
  const double width = (hi - lo) / kBins;
  std::array<double, kBins> hist{};
  for (float x : values) hist[std::min(kBins - 1, static_cast<int>((x - lo) / width))] += 1.0;

  // Running sums give the between-class variance of every split in one pass.
  double total = 0, total_sum = 0;
  for (int b = 0; b < kBins; ++b) {
    total += hist[b];
    total_sum += hist[b] * b;
  }
  double w0 = 0, s0 = 0, best = -1.0;
  int best_t = 0;
  for (int t = 0; t < kBins; ++t) {
    w0 += hist[t];
    s0 += hist[t] * t;
    const double w1 = total - w0;
    if (w0 == 0 || w1 == 0) continue;
    const double d = s0 / w0 - (total_sum - s0) / w1;
    const double var = (w0 / total) * (w1 / total) * d * d;
    if (var > best) {
      best = var;
      best_t = t;
    }
  }
  return lo + (best_t + 0.5) * width;
}

double otsu_threshold(const Volume& v) { return otsu_threshold(v.values()); }

Volume frangi_otsu_segment(const Volume& v, const FrangiParams& p, Volume* vesselness) {
  Volume vs = frangi_vesselness(v, p);
  std::vector<float> seg(v.size(), 0.f);
  const auto [lo, hi] = std::minmax_element(vs.values().begin(), vs.values().end());
  if (*hi > *lo) {
    const double t = otsu_threshold(vs);
    for (std::size_t i = 0; i < seg.size(); ++i) seg[i] = vs[i] > t ? 1.f : 0.f;
  } else {
    spdlog::warn("constant vesselness map; Frangi+Otsu segmentation is empty");
  }
  if (vesselness) *vesselness = std::move(vs);
  return v.with_values(std::move(seg), VolumeKind::label);
}

}  // namespace auxseg
