#include "auxseg/cli/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include "auxseg/cli/cli.hpp"
#include "auxseg/io_util.hpp"
#include "auxseg/metrics/metrics.hpp"

namespace auxseg::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path.string());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) rows.push_back(split(line));
  }
  return rows;
}

double parse_number(const std::string& s) {
  if (s == "inf") return INFINITY;
  if (s == "-inf") return -INFINITY;
  if (s.empty() || s == "nan") return metrics::kNaN;
  return std::stod(s);
}

struct Stats {
  std::size_t n = 0, excluded = 0;
  double mean = metrics::kNaN, sd = metrics::kNaN;
};

Stats stats(const std::vector<double>& values) {
  Stats s;
  double sum = 0.0;
  for (double v : values) {
    if (std::isfinite(v)) {
      ++s.n;
      sum += v;
    } else {
      ++s.excluded;
    }
  }
  if (s.n == 0) return s;
  s.mean = sum / s.n;
  if (s.n > 1) {
    double ss = 0.0;
    for (double v : values) {
      if (std::isfinite(v)) ss += (v - s.mean) * (v - s.mean);
    }
    s.sd = std::sqrt(ss / (s.n - 1));
  }
  return s;
}

using Key = std::pair<std::string, int>;  // model, n_annotated

std::string svg_plot(const std::map<std::string, std::vector<std::pair<int, double>>>& series) {
  constexpr double W = 640, H = 420, L = 70, R = 160, T = 30, B = 60;
  double xmin = INFINITY, xmax = -INFINITY, ymin = INFINITY, ymax = -INFINITY;
  for (const auto& [name, pts] : series) {
    for (auto [x, y] : pts) {
      xmin = std::min<double>(xmin, x);
      xmax = std::max<double>(xmax, x);
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
    }
  }
  if (xmax == xmin) {
    xmin -= 1;
    xmax += 1;
  }
  ymin = std::max(0.0, std::floor(ymin * 10 - 0.5) / 10);
  ymax = std::min(1.0, std::ceil(ymax * 10 + 0.5) / 10);
  if (ymax <= ymin) ymax = ymin + 0.1;
  auto px = [&](double x) { return L + (x - xmin) / (xmax - xmin) * (W - L - R); };
  auto py = [&](double y) { return H - B - (y - ymin) / (ymax - ymin) * (H - T - B); };

  std::string s = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" font-family=\"sans-serif\" "
      "font-size=\"12\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n",
      W, H);
  s += fmt::format("<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n", L, H - B, W - R, H - B);
  s += fmt::format("<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n", L, T, L, H - B);
  std::set<int> xs;
  for (const auto& [name, pts] : series)
    for (auto [x, y] : pts) xs.insert(x);
  for (int x : xs) {
    s += fmt::format("<text x=\"{:.1f}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n", px(x), H - B + 18, x);
  }
  for (int i = 0; i <= 4; ++i) {
    const double y = ymin + (ymax - ymin) * i / 4;
    s += fmt::format("<text x=\"{}\" y=\"{:.1f}\" text-anchor=\"end\">{:.2f}</text>\n", L - 6, py(y) + 4, y);
    s += fmt::format("<line x1=\"{}\" y1=\"{:.1f}\" x2=\"{}\" y2=\"{:.1f}\" stroke=\"#ddd\"/>\n", L, py(y), W - R, py(y));
  }
  s += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">annotated training cases</text>\n",
                   (L + W - R) / 2, H - 15);
  s += fmt::format("<text x=\"18\" y=\"{}\" transform=\"rotate(-90 18 {})\" text-anchor=\"middle\">mean test Dice</text>\n",
                   (T + H - B) / 2, (T + H - B) / 2);
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
  int c = 0;
  for (const auto& [name, pts] : series) {
    const char* color = colors[c % 6];
    std::string poly;
    for (auto [x, y] : pts) poly += fmt::format("{:.1f},{:.1f} ", px(x), py(y));
    s += fmt::format("<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"2\" points=\"{}\"/>\n", color, poly);
    for (auto [x, y] : pts) s += fmt::format("<circle cx=\"{:.1f}\" cy=\"{:.1f}\" r=\"3\" fill=\"{}\"/>\n", px(x), py(y), color);
    const double ly = T + 10 + 18 * c;
    s += fmt::format("<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{}\" stroke-width=\"2\"/>\n", W - R + 15, ly,
                     W - R + 35, ly, color);
    s += fmt::format("<text x=\"{}\" y=\"{}\">{}</text>\n", W - R + 40, ly + 4, name);
    ++c;
  }
  s += "</svg>\n";
  return s;
}

}  // namespace

std::vector<RunSummary> find_runs(const fs::path& runs_dir) {
  if (!fs::is_directory(runs_dir)) throw UsageError("runs directory not found: " + runs_dir.string());
  std::vector<fs::path> found;
  for (const auto& entry : fs::recursive_directory_iterator(runs_dir)) {
    if (entry.is_regular_file() && entry.path().filename() == "metrics.csv") found.push_back(entry.path());
  }
  std::sort(found.begin(), found.end());
  std::vector<RunSummary> runs;
  for (const fs::path& metrics_csv : found) {
    RunSummary r;
    const fs::path eval_dir = metrics_csv.parent_path();
    r.dir = eval_dir.filename() == "eval" ? eval_dir.parent_path() : eval_dir;
    r.model = r.dir.filename().string();
    if (fs::exists(eval_dir / "provenance.json")) {
      const json p = json::parse(read_file(eval_dir / "provenance.json"));
      if (p.contains("config") && p["config"].contains("model")) r.model = p["config"]["model"];
    }
    if (fs::exists(r.dir / "run.json")) {
      const json run = json::parse(read_file(r.dir / "run.json"));
      r.model = run["config"]["regime"];
      r.n_annotated = static_cast<int>(run["cases"]["triplets"].size());
    }
    const auto rows = read_csv(metrics_csv);
    if (rows.empty()) continue;
    const auto& header = rows.front();
    std::vector<int> cols;
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (header[c] == "id" || header[c] == "flags") continue;
      cols.push_back(static_cast<int>(c));
      r.metric_names.push_back(header[c]);
    }
    for (std::size_t i = 1; i < rows.size(); ++i) {
      std::vector<double> v;
      for (int c : cols) v.push_back(c < static_cast<int>(rows[i].size()) ? parse_number(rows[i][c]) : metrics::kNaN);
      r.case_values.push_back(std::move(v));
    }
    if (fs::exists(eval_dir / "stratified.csv")) r.stratified_csv = eval_dir / "stratified.csv";
    runs.push_back(std::move(r));
  }
  return runs;
}

void write_report(const ReportOptions& o) {
  const std::vector<RunSummary> runs = find_runs(o.runs_dir);
  if (runs.empty()) throw UsageError("no evaluated runs (eval/metrics.csv) under " + o.runs_dir.string());
  const fs::path out = o.out ? *o.out : o.runs_dir;

  static const std::vector<std::string> table2_metrics{"dice", "jaccard", "msd_mm", "recall", "precision",
                                                       "abs_vvr_diff"};
  std::map<Key, std::map<std::string, std::vector<double>>> pooled;
  std::map<Key, std::vector<double>> run_dice;
  std::map<Key, int> run_count;
  for (const RunSummary& r : runs) {
    const Key key{r.model, r.n_annotated};
    ++run_count[key];
    double dice_sum = 0.0;
    int dice_n = 0;
    for (const auto& values : r.case_values) {
      for (std::size_t m = 0; m < r.metric_names.size(); ++m) {
        pooled[key][r.metric_names[m]].push_back(values[m]);
        if (r.metric_names[m] == "dice" && std::isfinite(values[m])) {
          dice_sum += values[m];
          ++dice_n;
        }
      }
    }
    if (dice_n > 0) run_dice[key].push_back(dice_sum / dice_n);
  }

  // Runs without a run.json have an unknown annotation count; left blank.
  auto annotated = [](int n) { return n < 0 ? std::string() : std::to_string(n); };
  std::string t2 = "model,n_annotated,runs,metric,n,excluded,mean,sd\n";
  for (const auto& [key, by_metric] : pooled) {
    for (const std::string& m : table2_metrics) {
      const auto it = by_metric.find(m);
      if (it == by_metric.end()) continue;
      const Stats s = stats(it->second);
      t2 += fmt::format("{},{},{},{},{},{},{},{}\n", key.first, annotated(key.second), run_count[key], m, s.n, s.excluded,
                        metrics::format_number(s.mean), metrics::format_number(s.sd));
    }
  }
  write_file_atomic(out / "table2.csv", t2);

  // Stratified rows: model,case,group,metric,value.
  std::map<std::tuple<std::string, int, std::string, std::string>, std::vector<double>> strat;
  std::vector<std::string> group_order;
  for (const RunSummary& r : runs) {
    if (r.stratified_csv.empty()) continue;
    const auto rows = read_csv(r.stratified_csv);
    for (std::size_t i = 1; i < rows.size(); ++i) {
      if (rows[i].size() < 5) continue;
      if (std::find(group_order.begin(), group_order.end(), rows[i][2]) == group_order.end()) {
        group_order.push_back(rows[i][2]);
      }
      strat[{r.model, r.n_annotated, rows[i][2], rows[i][3]}].push_back(parse_number(rows[i][4]));
    }
  }
  std::string t5 = "model,n_annotated,group,metric,n,excluded,mean,sd\n";
  for (const auto& [key, by_metric] : pooled) {
    for (const std::string& g : group_order) {
      for (const char* m : {"voxel_share", "dice", "msd_mm", "recall", "precision"}) {
        const auto it = strat.find({key.first, key.second, g, m});
        if (it == strat.end()) continue;
        const Stats s = stats(it->second);
        t5 += fmt::format("{},{},{},{},{},{},{},{}\n", key.first, annotated(key.second), g, m, s.n, s.excluded,
                          metrics::format_number(s.mean), metrics::format_number(s.sd));
      }
    }
  }
  write_file_atomic(out / "table5.csv", t5);

  std::string fa = "model,n_annotated,runs,dice_mean,dice_sd\n";
  std::map<std::string, std::vector<std::pair<int, double>>> series;
  for (const auto& [key, values] : run_dice) {
    const Stats s = stats(values);
    fa += fmt::format("{},{},{},{},{}\n", key.first, annotated(key.second), values.size(), metrics::format_number(s.mean),
                      metrics::format_number(s.sd));
    if (key.second >= 0 && std::isfinite(s.mean)) series[key.first].emplace_back(key.second, s.mean);
  }
  write_file_atomic(out / "few_annotations.csv", fa);
  write_file_atomic(out / "few_annotations.svg", svg_plot(series));
  spdlog::info("report over {} run(s) written to {}", runs.size(), out.string());
}

}  // namespace auxseg::cli
