#include "auxseg/metrics/metrics.hpp"

#include <cmath>
#include <sstream>

#include <fmt/format.h>

#include "auxseg/io_util.hpp"
#include "auxseg/vesselstats/distance.hpp"

namespace auxseg::metrics {

ConfusionCounts confusion(std::span<const float> gt, std::span<const float> pred) {
  if (gt.size() != pred.size()) throw ArgumentError("confusion: masks differ in size");
  ConfusionCounts c;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const bool g = gt[i] >= 0.5f, p = pred[i] >= 0.5f;
    if (g && p) {
      ++c.tp;
    } else if (p) {
      ++c.fp;
    } else if (g) {
      ++c.fn;
    } else {
      ++c.tn;
    }
  }
  return c;
}

ConfusionCounts confusion(const Volume& gt, const Volume& pred) {
  if (gt.extent() != pred.extent()) {
    throw ArgumentError("shape mismatch: " + to_string(gt.extent()) + " vs " + to_string(pred.extent()));
  }
  return confusion(gt.values(), pred.values());
}

double dice(const ConfusionCounts& c) {
  const double denom = 2.0 * c.tp + c.fp + c.fn;
  return denom == 0.0 ? 1.0 : 2.0 * c.tp / denom;
}

double jaccard(const ConfusionCounts& c) {
  const double denom = static_cast<double>(c.tp + c.fp + c.fn);
  return denom == 0.0 ? 1.0 : c.tp / denom;
}

double recall(const ConfusionCounts& c) {
  const double denom = static_cast<double>(c.tp + c.fn);
  return denom == 0.0 ? 1.0 : c.tp / denom;
}

double precision(const ConfusionCounts& c) {
  const double denom = static_cast<double>(c.tp + c.fp);
  if (denom == 0.0) return c.fn == 0 ? 1.0 : 0.0;
  return c.tp / denom;
}

double mean_surface_distance(std::span<const float> gt, std::span<const float> pred, const Extent3& extent,
                             const Vec3& spacing) {
  if (gt.size() != pred.size() || gt.size() != extent.count()) throw ArgumentError("msd: shape mismatch");
  const auto sg = surface_voxels(gt, extent);
  const auto sp = surface_voxels(pred, extent);
  std::size_t ng = 0, np = 0;
  for (std::size_t i = 0; i < sg.size(); ++i) {
    ng += sg[i];
    np += sp[i];
  }
  if (ng == 0 && np == 0) return 0.0;
  if (ng == 0 || np == 0) return std::numeric_limits<double>::infinity();

  const FeatureTransform to_pred = feature_transform(sp, extent, spacing);
  const FeatureTransform to_gt = feature_transform(sg, extent, spacing);
  double sum = 0.0;
  for (std::size_t i = 0; i < sg.size(); ++i) {
    if (sg[i]) sum += std::sqrt(to_pred.sq_distance[i]);
    if (sp[i]) sum += std::sqrt(to_gt.sq_distance[i]);
  }
  return sum / static_cast<double>(ng + np);
}

double mean_surface_distance(const Volume& gt, const Volume& pred) {
  if (gt.extent() != pred.extent()) throw ArgumentError("msd: shape mismatch");
  return mean_surface_distance(gt.values(), pred.values(), gt.extent(), gt.spacing());
}

double vvr(const Volume& liver_mask, const Volume& vessel_mask) {
  if (liver_mask.extent() != vessel_mask.extent()) throw ArgumentError("vvr: shape mismatch");
  std::size_t liver = 0, vessel = 0;
  for (float v : liver_mask.values()) liver += v >= 0.5f;
  for (float v : vessel_mask.values()) vessel += v >= 0.5f;
  if (vessel == 0) throw ArgumentError("VVR undefined: empty vessel mask");
  return static_cast<double>(liver) / static_cast<double>(vessel);
}

double abs_vvr_diff(double vvr_gt, double vvr_pred) { return std::abs(vvr_gt - vvr_pred); }

BlandAltman bland_altman(std::span<const std::pair<double, double>> gt_pred) {
  if (gt_pred.size() < 2) throw ArgumentError("Bland-Altman analysis needs at least 2 pairs");
  BlandAltman r;
  r.n = gt_pred.size();
  double sum = 0.0;
  for (const auto& [g, p] : gt_pred) sum += p - g;
  r.mean_diff = sum / static_cast<double>(r.n);
  double ss = 0.0;
  for (const auto& [g, p] : gt_pred) ss += (p - g - r.mean_diff) * (p - g - r.mean_diff);
  r.sd_diff = std::sqrt(ss / static_cast<double>(r.n - 1));
  r.loa_low = r.mean_diff - 1.96 * r.sd_diff;
  r.loa_high = r.mean_diff + 1.96 * r.sd_diff;
  return r;
}

CaseMetrics evaluate_case(const std::string& id, const Volume& gt, const Volume& pred,
                          const std::optional<Volume>& liver_mask) {
  CaseMetrics m;
  m.id = id;
  m.counts = confusion(gt, pred);
  m.dice = dice(m.counts);
  m.jaccard = jaccard(m.counts);
  m.recall = recall(m.counts);
  m.precision = precision(m.counts);
  m.msd_mm = mean_surface_distance(gt, pred);
  const bool gt_empty = m.counts.tp + m.counts.fn == 0;
  const bool pred_empty = m.counts.tp + m.counts.fp == 0;
  if (gt_empty && pred_empty) m.flags.push_back("both_empty");
  if (gt_empty && !pred_empty) m.flags.push_back("gt_empty");
  if (pred_empty && !gt_empty) m.flags.push_back("pred_empty");
  if (std::isinf(m.msd_mm)) m.flags.push_back("msd_inf");
  if (liver_mask) {
    if (liver_mask->extent() != gt.extent()) throw ArgumentError("liver mask shape mismatch");
    if (!gt_empty) m.vvr_gt = vvr(*liver_mask, gt);
    if (!pred_empty) m.vvr_pred = vvr(*liver_mask, pred);
    if (gt_empty || pred_empty) {
      m.flags.push_back("vvr_undefined");
    } else {
      m.abs_vvr_diff = abs_vvr_diff(m.vvr_gt, m.vvr_pred);
    }
  }
  return m;
}

namespace {

Aggregate summarize(const std::string& name, std::span<const CaseMetrics> cases, double CaseMetrics::*field) {
  Aggregate a;
  a.metric = name;
  std::vector<double> vals;
  for (const auto& c : cases) {
    const double v = c.*field;
    if (std::isfinite(v)) {
      vals.push_back(v);
    } else {
      ++a.excluded;
    }
  }
  a.n = vals.size();
  if (vals.empty()) return a;
  double sum = 0.0;
  for (double v : vals) sum += v;
  a.mean = sum / static_cast<double>(vals.size());
  if (vals.size() >= 2) {
    double ss = 0.0;
    for (double v : vals) ss += (v - a.mean) * (v - a.mean);
    a.sd = std::sqrt(ss / static_cast<double>(vals.size() - 1));
  } else {
    a.sd = 0.0;
  }
  return a;
}

}  // namespace

std::vector<Aggregate> aggregate(std::span<const CaseMetrics> cases) {
  return {summarize("dice", cases, &CaseMetrics::dice),
          summarize("jaccard", cases, &CaseMetrics::jaccard),
          summarize("msd_mm", cases, &CaseMetrics::msd_mm),
          summarize("recall", cases, &CaseMetrics::recall),
          summarize("precision", cases, &CaseMetrics::precision),
          summarize("abs_vvr_diff", cases, &CaseMetrics::abs_vvr_diff)};
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return fmt::format("{:.6g}", v);
}

std::string case_csv_header() {
  return "id,dice,jaccard,msd_mm,recall,precision,vvr_gt,vvr_pred,abs_vvr_diff,tp,fp,fn,tn,flags";
}

std::string case_csv_row(const CaseMetrics& m) {
  std::string flags;
  for (const auto& f : m.flags) flags += (flags.empty() ? "" : ";") + f;
  return fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{},{}", m.id, format_number(m.dice), format_number(m.jaccard),
                     format_number(m.msd_mm), format_number(m.recall), format_number(m.precision),
                     format_number(m.vvr_gt), format_number(m.vvr_pred), format_number(m.abs_vvr_diff), m.counts.tp,
                     m.counts.fp, m.counts.fn, m.counts.tn, flags);
}

void write_case_csv(const std::filesystem::path& path, std::span<const CaseMetrics> cases) {
  std::string out = case_csv_header() + "\n";
  for (const auto& c : cases) out += case_csv_row(c) + "\n";
  write_file_atomic(path, out);
}

void write_aggregate_csv(const std::filesystem::path& path, std::span<const Aggregate> rows) {
  std::string out = "metric,n,excluded,mean,sd\n";
  for (const auto& a : rows) {
    out += fmt::format("{},{},{},{},{}\n", a.metric, a.n, a.excluded, format_number(a.mean), format_number(a.sd));
  }
  write_file_atomic(path, out);
}

}  // namespace auxseg::metrics
