#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "auxseg/metrics/metrics.hpp"
#include "auxseg/vesselstats/skeleton.hpp"

namespace auxseg {

/// Diameter bins in mm, left-closed and right-open; the last bin is open
/// ended. Default: [0,5), [5,10), [10,15), [15,inf).
struct ThicknessBins {
  std::vector<double> edges_mm{0.0, 5.0, 10.0, 15.0};

  void validate() const;  // strictly increasing, first edge 0
  int size() const { return static_cast<int>(edges_mm.size()); }
  int bin(double diameter_mm) const;
  std::string label(int group) const;  // "0-5", ..., ">15"
};

/// Group of the nearest ground-truth skeleton voxel for every voxel of the
/// grid (-1 where no skeleton exists).
struct GroupMap {
  std::vector<int> group;
  SkeletonResult skeleton;
};

GroupMap nearest_skeleton_groups(const Volume& gt_mask, const ThicknessBins& bins);

/// Group id per ground-truth voxel, -1 elsewhere. If the skeleton of a
/// nonempty mask is empty, every voxel goes to the bin of the largest EDT
/// diameter (with a warning).
Volume thickness_partition(const Volume& gt_mask, const ThicknessBins& bins = {});

struct GroupMetrics {
  int group = 0;
  std::string label;
  metrics::ConfusionCounts counts;
  double dice = 0.0, msd_mm = 0.0, recall = 0.0, precision = 0.0;
  double voxel_share = 0.0;  // share of all ground-truth vessel voxels
};

struct StratifiedResult {
  std::vector<GroupMetrics> groups;
  metrics::ConfusionCounts global;
  std::uint64_t unassigned_fp = 0;  // false positives with an empty ground truth
};

/// TP and FN voxels take their ground-truth voxel's group; FP voxels take the
/// group of the diameter at the nearest ground-truth skeleton voxel. Per
/// group, MSD compares gt and pred restricted to that group's voxels.
StratifiedResult stratified_metrics(const Volume& gt, const Volume& pred, const ThicknessBins& bins = {});

/// Long-format CSV: model,case,group,metric,value with metric in
/// dice,msd_mm,recall,precision,voxel_share,tp,fp,fn.
struct StratifiedRow {
  std::string model;
  std::string case_id;
  StratifiedResult result;
};
std::string stratified_csv_header();
void write_stratified_csv(const std::filesystem::path& path, std::span<const StratifiedRow> rows);

}  // namespace auxseg
