#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "auxseg/volumes/volume.hpp"

namespace auxseg::metrics {

struct ConfusionCounts {
  std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;

  std::uint64_t total() const { return tp + fp + fn + tn; }
  ConfusionCounts& operator+=(const ConfusionCounts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    tn += o.tn;
    return *this;
  }
  bool operator==(const ConfusionCounts&) const = default;
};

ConfusionCounts confusion(std::span<const float> gt, std::span<const float> pred);
ConfusionCounts confusion(const Volume& gt, const Volume& pred);

// Empty-mask conventions: both empty gives 1 for every score; an empty
// ground truth with a nonempty prediction gives recall 1, precision 0.
double dice(const ConfusionCounts& c);
double jaccard(const ConfusionCounts& c);
double recall(const ConfusionCounts& c);
double precision(const ConfusionCounts& c);

/// Symmetric mean surface distance in mm: the mean over the surface voxels
/// of both masks of the distance to the nearest surface voxel of the other
/// mask. +inf when exactly one mask is empty, 0 when both are.
double mean_surface_distance(std::span<const float> gt, std::span<const float> pred, const Extent3& extent,
                             const Vec3& spacing);
double mean_surface_distance(const Volume& gt, const Volume& pred);

/// Liver volume over vessel volume (voxel counts on a shared grid).
/// Throws ArgumentError("VVR undefined ...") for an empty vessel mask.
double vvr(const Volume& liver_mask, const Volume& vessel_mask);
double abs_vvr_diff(double vvr_gt, double vvr_pred);

struct BlandAltman {
  std::size_t n = 0;
  double mean_diff = 0.0;
  double sd_diff = 0.0;  // sample standard deviation (n - 1)
  double loa_low = 0.0;
  double loa_high = 0.0;
};

/// Differences are pred - gt; limits of agreement mean +- 1.96 sd.
BlandAltman bland_altman(std::span<const std::pair<double, double>> gt_pred);

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct CaseMetrics {
  std::string id;
  ConfusionCounts counts;
  double dice = 0.0, jaccard = 0.0, recall = 0.0, precision = 0.0;
  double msd_mm = 0.0;  // +inf sentinel for an empty mask
  double vvr_gt = kNaN, vvr_pred = kNaN, abs_vvr_diff = kNaN;  // NaN without liver mask
  std::vector<std::string> flags;  // sentinel / undefined cases
};

/// All global metrics for one case. VVR needs a liver mask; an empty
/// prediction leaves vvr_pred undefined and flags it.
CaseMetrics evaluate_case(const std::string& id, const Volume& gt, const Volume& pred,
                          const std::optional<Volume>& liver_mask = std::nullopt);

/// Mean and sample sd across cases, ignoring non-finite values.
struct Aggregate {
  std::string metric;
  std::size_t n = 0;
  std::size_t excluded = 0;  // non-finite values (e.g. infinite MSD)
  double mean = kNaN;
  double sd = kNaN;
};

std::vector<Aggregate> aggregate(std::span<const CaseMetrics> cases);

/// CSV schemas (header lines):
///   per case:  id,dice,jaccard,msd_mm,recall,precision,vvr_gt,vvr_pred,abs_vvr_diff,tp,fp,fn,tn,flags
///   aggregate: metric,n,excluded,mean,sd
std::string case_csv_header();
std::string case_csv_row(const CaseMetrics& m);
void write_case_csv(const std::filesystem::path& path, std::span<const CaseMetrics> cases);
void write_aggregate_csv(const std::filesystem::path& path, std::span<const Aggregate> rows);

/// Number formatting used in all CSV output ("inf", "nan", else %.6g-like).
std::string format_number(double v);

}  // namespace auxseg::metrics
