#include "auxseg/vesselstats/stratified.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "auxseg/io_util.hpp"
#include "auxseg/vesselstats/distance.hpp"

namespace auxseg {

void ThicknessBins::validate() const {
  if (edges_mm.empty() || edges_mm.front() != 0.0) throw ArgumentError("thickness bins must start at 0");
  for (std::size_t i = 1; i < edges_mm.size(); ++i) {
    if (!(edges_mm[i] > edges_mm[i - 1])) throw ArgumentError("thickness bin edges must be strictly increasing");
  }
}

int ThicknessBins::bin(double d) const {
  const auto it = std::upper_bound(edges_mm.begin(), edges_mm.end(), d);
  return std::max(0, static_cast<int>(it - edges_mm.begin()) - 1);
}

std::string ThicknessBins::label(int g) const {
  if (g + 1 >= size()) return fmt::format(">{:g}", edges_mm[g]);
  return fmt::format("{:g}-{:g}", edges_mm[g], edges_mm[g + 1]);
}

GroupMap nearest_skeleton_groups(const Volume& gt, const ThicknessBins& bins) {
  bins.validate();
  const Extent3& e = gt.extent();
  GroupMap m;
  m.skeleton = skeletonize(gt);
  m.group.assign(e.count(), -1);
  if (m.skeleton.voxels.empty()) {
    if (gt.count_nonzero() == 0) return m;
    const Volume dist = edt(gt);
    const double dmax = 2.0 * *std::max_element(dist.values().begin(), dist.values().end());
    spdlog::warn("nonempty mask has an empty skeleton; all voxels assigned to diameter {:.3g} mm", dmax);
    std::fill(m.group.begin(), m.group.end(), bins.bin(dmax));
    return m;
  }
  std::vector<std::uint8_t> feature(e.count(), 0);
  std::vector<int> group_at(e.count(), -1);
  for (std::size_t s = 0; s < m.skeleton.voxels.size(); ++s) {
    feature[m.skeleton.voxels[s]] = 1;
    group_at[m.skeleton.voxels[s]] = bins.bin(m.skeleton.diameters_mm[s]);
  }
  const FeatureTransform ft = feature_transform(feature, e, gt.spacing());
  for (std::size_t i = 0; i < e.count(); ++i) m.group[i] = group_at[static_cast<std::size_t>(ft.nearest[i])];
  return m;
}

Volume thickness_partition(const Volume& gt, const ThicknessBins& bins) {
  const GroupMap m = nearest_skeleton_groups(gt, bins);
  std::vector<float> out(gt.size(), -1.f);
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (gt[i] != 0.f) out[i] = static_cast<float>(m.group[i]);
  }
  return gt.with_values(std::move(out), VolumeKind::intensity);
}

StratifiedResult stratified_metrics(const Volume& gt, const Volume& pred, const ThicknessBins& bins) {
  if (!same_grid(gt.geometry(), pred.geometry())) throw ArgumentError("stratified metrics: grid mismatch");
  const GroupMap m = nearest_skeleton_groups(gt, bins);
  const Extent3& e = gt.extent();
  StratifiedResult r;
  r.global = metrics::confusion(gt, pred);
  const double gt_total = static_cast<double>(r.global.tp + r.global.fn);

  std::vector<float> gt_g(e.count()), pred_g(e.count());
  for (int g = 0; g < bins.size(); ++g) {
    GroupMetrics gm;
    gm.group = g;
    gm.label = bins.label(g);
    for (std::size_t i = 0; i < e.count(); ++i) {
      const bool in = m.group[i] == g;
      const bool a = gt[i] != 0.f, b = pred[i] != 0.f;
      gt_g[i] = in && a ? 1.f : 0.f;
      pred_g[i] = in && b ? 1.f : 0.f;
      if (!in) continue;
      if (a && b) ++gm.counts.tp;
      else if (b) ++gm.counts.fp;
      else if (a) ++gm.counts.fn;
      else ++gm.counts.tn;
    }
    gm.dice = metrics::dice(gm.counts);
    gm.recall = metrics::recall(gm.counts);
    gm.precision = metrics::precision(gm.counts);
    gm.msd_mm = metrics::mean_surface_distance(gt_g, pred_g, e, gt.spacing());
    gm.voxel_share = gt_total > 0 ? static_cast<double>(gm.counts.tp + gm.counts.fn) / gt_total : 0.0;
    r.groups.push_back(std::move(gm));
  }
  if (gt_total == 0) r.unassigned_fp = r.global.fp;
  return r;
}

std::string stratified_csv_header() { return "model,case,group,metric,value"; }

void write_stratified_csv(const std::filesystem::path& path, std::span<const StratifiedRow> rows) {
  std::string out = stratified_csv_header() + "\n";
  for (const auto& row : rows) {
    for (const auto& g : row.result.groups) {
      auto line = [&](std::string_view metric, const std::string& value) {
        out += fmt::format("{},{},{},{},{}\n", row.model, row.case_id, g.label, metric, value);
      };
      line("dice", metrics::format_number(g.dice));
      line("msd_mm", metrics::format_number(g.msd_mm));
      line("recall", metrics::format_number(g.recall));
      line("precision", metrics::format_number(g.precision));
      line("voxel_share", metrics::format_number(g.voxel_share));
      line("tp", std::to_string(g.counts.tp));
      line("fp", std::to_string(g.counts.fp));
      line("fn", std::to_string(g.counts.fn));
    }
  }
  write_file_atomic(path, out);
}

}  // namespace auxseg
