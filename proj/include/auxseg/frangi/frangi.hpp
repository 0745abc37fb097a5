#pragma once

#include <optional>
#include <span>
#include <vector>

#include "auxseg/volumes/volume.hpp"

namespace auxseg {

struct FrangiParams {
  std::vector<double> scales_mm{1.0, 2.0, 3.0, 4.0, 5.0};
  double alpha = 0.5;
  double beta = 0.5;
  std::optional<double> c;  // nullopt: half the largest Hessian norm at each scale
  bool bright_on_dark = true;

  void validate() const;
};

/// Separable Gaussian smoothing with sigma given in mm (per-axis sigma in
/// voxels = sigma_mm / spacing). Kernel truncated at 3 sigma, edges
/// replicated.
Volume gaussian_smooth(const Volume& v, double sigma_mm);

/// Multiscale Hessian vesselness in [0, 1]: maximum over scales of the
/// single-scale response. Hessians come from central differences of the
/// smoothed volume, scaled by s^2 so responses are comparable across scales.
Volume frangi_vesselness(const Volume& v, const FrangiParams& p = {});

/// Vesselness at one scale, with the `c` actually used.
Volume frangi_single_scale(const Volume& v, double scale_mm, const FrangiParams& p, double* c_used = nullptr);

/// Otsu threshold on a 256-bin histogram spanning [min, max]. Returns the
/// centre of the last bin of the lower class. Throws ArgumentError for a
/// constant (or empty) volume.
double otsu_threshold(std::span<const float> values);
double otsu_threshold(const Volume& v);

/// Between-class variance of splitting a 256-bin histogram after bin t.
double otsu_between_class_variance(std::span<const double> histogram, int t);

/// vesselness > otsu_threshold(vesselness). A constant vesselness map (e.g.
/// constant input) yields an empty segmentation.
Volume frangi_otsu_segment(const Volume& v, const FrangiParams& p = {}, Volume* vesselness = nullptr);

}  // namespace auxseg
