#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace auxseg::cli {

struct ReportOptions {
  std::filesystem::path runs_dir;
  std::optional<std::filesystem::path> out;
};

/// One evaluated run: a directory holding eval/metrics.csv (written by
/// `eval --out <run>/eval`) and, for trained models, run.json.
struct RunSummary {
  std::filesystem::path dir;
  std::string model;      // regime from run.json, else the eval model name
  int n_annotated = -1;   // training triplets, -1 when unknown
  std::vector<std::string> metric_names;
  std::vector<std::vector<double>> case_values;  // [case][metric]
  std::filesystem::path stratified_csv;          // empty when absent
};

std::vector<RunSummary> find_runs(const std::filesystem::path& runs_dir);

/// Writes table2.csv (global metrics per model), table5.csv (stratified
/// metrics per model and group), few_annotations.csv and
/// few_annotations.svg (mean test Dice against annotated cases). Throws
/// UsageError when no runs are found.
void write_report(const ReportOptions& options);

}  // namespace auxseg::cli
