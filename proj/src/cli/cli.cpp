#include "auxseg/cli/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include "auxseg/cli/config.hpp"
#include "auxseg/cli/report.hpp"
#include "auxseg/inference/predict.hpp"
#include "auxseg/io_util.hpp"
#include "auxseg/metrics/metrics.hpp"
#include "auxseg/nets/checkpoint.hpp"
#include "auxseg/version.hpp"
#include "auxseg/vesselstats/stratified.hpp"
#include "auxseg/volumes/preprocess.hpp"

namespace auxseg::cli {

namespace fs = std::filesystem;
using nlohmann::json;

bool deterministic_mode() {
  const char* v = std::getenv("AUXSEG_DETERMINISTIC");
  return v && std::string_view(v) != "" && std::string_view(v) != "0";
}

namespace {

struct Common {
  std::optional<fs::path> config;
  bool verbose = false;
  bool quiet = false;
};

RunConfig load_config(const Common& c) { return c.config ? load_run_config(*c.config) : RunConfig{}; }

fs::path require_path(const std::optional<fs::path>& flag, const std::optional<fs::path>& from_config,
                      const char* what) {
  if (flag) return *flag;
  if (from_config) return *from_config;
  throw UsageError(std::string("missing ") + what);
}

void write_provenance(const fs::path& dir, const std::vector<std::string>& args, const json& config) {
  json j;
  j["command"] = args;
  j["code_version"] = std::string(code_version());
  j["library_version"] = std::string(library_version());
  j["deterministic"] = deterministic_mode();
  j["config"] = config;
  write_file_atomic(dir / "provenance.json", j.dump(2) + "\n");
}

// File name without the volume extension (.nii.gz, .nii, .raw, .json).
std::string volume_stem(const fs::path& p) {
  std::string name = p.filename().string();
  for (std::string_view ext : {".nii.gz", ".nii", ".raw", ".json"}) {
    if (has_suffix(p, ext)) return name.substr(0, name.size() - ext.size());
  }
  return p.stem().string();
}

std::string volume_ext(VolumeFormat f) { return f == VolumeFormat::nifti ? ".nii.gz" : ".raw"; }

VolumeFormat parse_format(const std::string& s) {
  if (s == "nifti") return VolumeFormat::nifti;
  if (s == "raw") return VolumeFormat::raw_json;
  throw UsageError("unknown volume format '" + s + "' (expected nifti or raw)");
}

json phantom_json(const synth::PhantomConfig& p) {
  return {{"shape", {p.shape.x, p.shape.y, p.shape.z}},
          {"spacing_mm", p.spacing_mm},
          {"n_trees", p.n_trees},
          {"root_radius_mm", p.root_radius_mm},
          {"branch_levels", p.branch_levels},
          {"radius_decay", p.radius_decay},
          {"radius_jitter", p.radius_jitter},
          {"native_contrast", p.vessel_contrast.native},
          {"contrast_enhanced", p.vessel_contrast.contrast_enhanced},
          {"noise_sigma", p.noise_sigma},
          {"bias_field_amplitude", p.bias_field_amplitude},
          {"background_intensity", p.background_intensity},
          {"liver_fraction", p.liver_fraction},
          {"seed", p.seed}};
}

json frangi_json(const FrangiParams& p) {
  return {{"scales_mm", p.scales_mm},
          {"alpha", p.alpha},
          {"beta", p.beta},
          {"c", p.c ? json(*p.c) : json("auto")},
          {"bright_on_dark", p.bright_on_dark}};
}

// Inputs for predict and baseline-frangi: explicit files, or the records of
// a manifest with a given role.
struct Inputs {
  std::vector<fs::path> files;
  std::optional<fs::path> manifest;
  std::string role = "test";
  std::string image = "source";
};

struct InputItem {
  std::string name;
  fs::path path;
};

std::vector<InputItem> resolve_inputs(const Inputs& in, const RunConfig& cfg) {
  std::vector<InputItem> items;
  for (const auto& f : in.files) items.push_back({volume_stem(f), f});
  if (in.manifest || (items.empty() && cfg.data)) {
    const DatasetManifest m = load_manifest(in.manifest ? *in.manifest : *cfg.data);
    const SampleRole role = parse_sample_role(in.role);
    for (const ManifestRecord* r : m.with_role(role)) {
      if (in.image == "source") {
        items.push_back({r->id, r->source});
      } else if (in.image == "auxiliary") {
        if (!r->auxiliary) throw UsageError("record " + r->id + " has no auxiliary image");
        items.push_back({r->id, *r->auxiliary});
      } else {
        throw UsageError("--image must be source or auxiliary");
      }
    }
  }
  if (items.empty()) throw UsageError("no input volumes (use --input or --data)");
  return items;
}

fs::path output_path(const std::optional<fs::path>& out_dir, const InputItem& item, const std::string& suffix,
                     VolumeFormat fmt) {
  const fs::path dir = out_dir ? *out_dir : item.path.parent_path();
  return dir / (item.name + suffix + volume_ext(fmt));
}

// ---------------------------------------------------------------- gen

struct GenOptions {
  std::optional<fs::path> out;
  std::optional<int> triplets, pairs, test;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> format;
  std::optional<double> native_contrast;
};

int cmd_gen(const Common& c, const GenOptions& o, const std::vector<std::string>& args) {
  RunConfig cfg = load_config(c);
  const fs::path out = require_path(o.out, cfg.output, "output directory (--out)");
  if (o.triplets) cfg.gen.n_triplets = *o.triplets;
  if (o.pairs) cfg.gen.n_pairs = *o.pairs;
  if (o.test) cfg.gen.n_test = *o.test;
  if (o.seed) cfg.phantom.seed = *o.seed;
  if (o.format) cfg.gen.format = parse_format(*o.format);
  if (o.native_contrast) cfg.phantom.vessel_contrast.native = *o.native_contrast;
  cfg.phantom.validate();
  const DatasetManifest m =
      synth::generate_dataset(cfg.gen.n_triplets, cfg.gen.n_pairs, cfg.gen.n_test, cfg.phantom, out, cfg.gen.format);
  write_provenance(out, args,
                   {{"phantom", phantom_json(cfg.phantom)},
                    {"n_triplets", cfg.gen.n_triplets},
                    {"n_pairs", cfg.gen.n_pairs},
                    {"n_test", cfg.gen.n_test}});
  spdlog::info("wrote {} case(s) and {}", m.records.size(), (out / "manifest.json").string());
  return kExitOk;
}

// ---------------------------------------------------------------- train

struct TrainOptions {
  std::optional<fs::path> data, out, sigma_checkpoint, resume;
  std::optional<std::string> regime, sigma_mode;
  std::optional<int> epochs, finetune_epochs, triplets, pairs;
  std::optional<double> lr;
  std::optional<std::uint64_t> seed;
  std::vector<double> fixed_sigmas;
  std::vector<std::string> validation;
};

int cmd_train(const Common& c, const TrainOptions& o) {
  RunConfig cfg = load_config(c);
  train::TrainConfig& t = cfg.train;
  const fs::path data = require_path(o.data, cfg.data, "dataset manifest (--data)");
  t.checkpoint_dir = require_path(o.out, cfg.output, "output directory (--out)");
  if (o.regime) t.regime = train::parse_regime(*o.regime);
  if (o.sigma_mode) t.sigma_mode = nn::parse_sigma_mode(*o.sigma_mode);
  if (o.epochs) t.epochs = *o.epochs;
  if (o.finetune_epochs) t.finetune_epochs = *o.finetune_epochs;
  if (o.triplets) t.max_triplets = *o.triplets;
  if (o.pairs) t.max_pairs = *o.pairs;
  if (o.lr) t.learning_rate = *o.lr;
  if (o.seed) t.seed = *o.seed;
  if (o.sigma_checkpoint) t.sigma_checkpoint = *o.sigma_checkpoint;
  if (o.resume) t.resume_from = *o.resume;
  if (!o.fixed_sigmas.empty()) {
    if (o.fixed_sigmas.size() != 2) throw UsageError("--fixed-sigmas takes two values");
    t.fixed_sigmas = std::make_pair(o.fixed_sigmas[0], o.fixed_sigmas[1]);
  }
  if (!o.validation.empty()) t.validation_ids = o.validation;
  t.validate();
  const train::TrainResult r = train::run_regime(t, load_manifest(data));
  spdlog::info("final checkpoint: {}", (t.checkpoint_dir / "final.ckpt").string());
  if (r.best_checkpoint) spdlog::info("best checkpoint: {} (val dice {:.4f})", r.best_checkpoint->string(), r.best_val_dice);
  return kExitOk;
}

// ---------------------------------------------------------------- predict

struct PredictOptions {
  fs::path checkpoint;
  Inputs inputs;
  std::optional<fs::path> out;
  std::vector<int> patch, stride;
  std::string format = "nifti";
};

Extent3 extent_flag(const std::vector<int>& v, const char* name) {
  if (v.size() != 3) throw UsageError(std::string("--") + name + " takes three integers");
  return {v[0], v[1], v[2]};
}

int cmd_predict(const Common& c, const PredictOptions& o, const std::vector<std::string>& args) {
  const RunConfig cfg = load_config(c);
  const nn::Checkpoint ckpt = nn::load_checkpoint(o.checkpoint);
  PatchSpec spec = cfg.train.patch;
  if (!c.config && ckpt.info.contains("train_config") && ckpt.info["train_config"].contains("patch")) {
    const json& p = ckpt.info["train_config"]["patch"];
    spec.patch_size = {p["size"][0], p["size"][1], p["size"][2]};
    spec.stride = {p["stride"][0], p["stride"][1], p["stride"][2]};
  }
  if (!o.patch.empty()) spec.patch_size = extent_flag(o.patch, "patch");
  if (!o.stride.empty()) spec.stride = extent_flag(o.stride, "stride");
  spec.validate();
  const VolumeFormat fmt = parse_format(o.format);

  for (const InputItem& item : resolve_inputs(o.inputs, cfg)) {
    const Volume v = zscore_normalize(load_volume(item.path));
    const PredictionResult r = predict_volume(ckpt.model, v, spec);
    save_volume(r.probability, output_path(o.out, item, "_prob", fmt), fmt);
    save_volume(r.segmentation, output_path(o.out, item, "_seg", fmt), fmt);
    if (r.translation) save_volume(*r.translation, output_path(o.out, item, "_trans", fmt), fmt);
    spdlog::info("predicted {}", item.name);
  }
  if (o.out) {
    write_provenance(*o.out, args,
                     {{"checkpoint", fs::absolute(o.checkpoint).string()},
                      {"patch", {spec.patch_size.x, spec.patch_size.y, spec.patch_size.z}},
                      {"stride", {spec.stride.x, spec.stride.y, spec.stride.z}}});
  }
  return kExitOk;
}

// ---------------------------------------------------------------- eval

struct EvalOptions {
  std::optional<fs::path> gt, pred, liver;
  std::optional<fs::path> data, pred_dir, out;
  std::string role = "test";
  std::string model = "model";
  int workers = 1;
  bool vvr_reciprocal = false;
  bool no_stratified = false;
};

struct EvalCase {
  std::string id;
  fs::path gt, pred;
  std::optional<fs::path> liver;
};

fs::path find_prediction(const fs::path& dir, const std::string& id) {
  for (const char* ext : {".nii.gz", ".nii", ".raw"}) {
    const fs::path p = dir / (id + "_seg" + ext);
    if (fs::exists(p)) return p;
  }
  throw Error("no prediction for case " + id + " in " + dir.string());
}

// VVR is liver/vessel; the reciprocal is available for exploration only.
void apply_vvr_reciprocal(metrics::CaseMetrics& m) {
  auto inv = [](double x) { return std::isfinite(x) && x != 0.0 ? 1.0 / x : metrics::kNaN; };
  m.vvr_gt = inv(m.vvr_gt);
  m.vvr_pred = inv(m.vvr_pred);
  m.abs_vvr_diff = std::abs(m.vvr_gt - m.vvr_pred);
}

int cmd_eval(const Common& c, EvalOptions o, const std::vector<std::string>& args) {
  const RunConfig cfg = load_config(c);
  if (deterministic_mode() && o.workers != 1) {
    spdlog::info("deterministic mode: evaluating with one worker");
    o.workers = 1;
  }
  if (o.workers < 1) throw UsageError("--workers must be >= 1");

  std::vector<EvalCase> cases;
  if (o.gt || o.pred) {
    if (!o.gt || !o.pred) throw UsageError("--gt and --pred must be given together");
    cases.push_back({volume_stem(*o.gt), *o.gt, *o.pred, o.liver});
  } else {
    const fs::path data = require_path(o.data, cfg.data, "--gt/--pred or a manifest (--data)");
    if (!o.pred_dir) throw UsageError("--pred-dir is required with --data");
    const DatasetManifest m = load_manifest(data);
    for (const ManifestRecord* r : m.with_role(parse_sample_role(o.role))) {
      if (!r->label) continue;
      cases.push_back({r->id, *r->label, find_prediction(*o.pred_dir, r->id), r->liver_mask});
    }
    if (cases.empty()) throw UsageError("no labelled records with role " + o.role);
  }

  std::vector<metrics::CaseMetrics> results(cases.size());
  std::vector<StratifiedRow> strat(cases.size());
  std::atomic<std::size_t> next{0};
  std::vector<std::string> errors(cases.size());
  auto worker = [&] {
    for (std::size_t i = next++; i < cases.size(); i = next++) {
      try {
        const EvalCase& ec = cases[i];
        const Volume gt = load_volume(ec.gt, VolumeKind::label);
        const Volume pred = load_volume(ec.pred, VolumeKind::label);
        std::optional<Volume> liver;
        if (ec.liver) liver = load_volume(*ec.liver, VolumeKind::label);
        results[i] = metrics::evaluate_case(ec.id, gt, pred, liver);
        if (o.vvr_reciprocal) apply_vvr_reciprocal(results[i]);
        if (!o.no_stratified) strat[i] = {o.model, ec.id, stratified_metrics(gt, pred)};
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int w = 1; w < std::min<int>(o.workers, static_cast<int>(cases.size())); ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (std::size_t i = 0; i < cases.size(); ++i) {
    if (!errors[i].empty()) throw Error("case " + cases[i].id + ": " + errors[i]);
  }

  if (!o.out) {
    std::string text = metrics::case_csv_header() + "\n";
    for (const auto& m : results) text += metrics::case_csv_row(m) + "\n";
    std::fwrite(text.data(), 1, text.size(), stdout);
    return kExitOk;
  }
  fs::create_directories(*o.out);
  metrics::write_case_csv(*o.out / "metrics.csv", results);
  metrics::write_aggregate_csv(*o.out / "aggregate.csv", metrics::aggregate(results));
  if (!o.no_stratified) write_stratified_csv(*o.out / "stratified.csv", strat);

  std::vector<std::pair<double, double>> vvr_pairs;
  std::string points = "id,vvr_gt,vvr_pred,diff\n";
  for (const auto& m : results) {
    if (!std::isfinite(m.vvr_gt) || !std::isfinite(m.vvr_pred)) continue;
    vvr_pairs.emplace_back(m.vvr_gt, m.vvr_pred);
    points += fmt::format("{},{},{},{}\n", m.id, metrics::format_number(m.vvr_gt), metrics::format_number(m.vvr_pred),
                          metrics::format_number(m.vvr_pred - m.vvr_gt));
  }
  std::string ba = "n,mean_diff,sd_diff,loa_low,loa_high\n";
  if (vvr_pairs.size() >= 2) {
    const metrics::BlandAltman b = metrics::bland_altman(vvr_pairs);
    ba += fmt::format("{},{},{},{},{}\n", b.n, metrics::format_number(b.mean_diff), metrics::format_number(b.sd_diff),
                      metrics::format_number(b.loa_low), metrics::format_number(b.loa_high));
  } else {
    spdlog::warn("Bland-Altman analysis needs at least two cases with VVR; bland_altman.csv has no data row");
  }
  write_file_atomic(*o.out / "bland_altman.csv", ba);
  write_file_atomic(*o.out / "bland_altman_points.csv", points);
  write_provenance(*o.out, args, {{"model", o.model}, {"cases", cases.size()}, {"vvr_reciprocal", o.vvr_reciprocal}});
  spdlog::info("evaluated {} case(s) into {}", cases.size(), o.out->string());
  return kExitOk;
}

// ---------------------------------------------------------------- baseline-frangi

struct FrangiOptions {
  Inputs inputs;
  std::optional<fs::path> out;
  std::vector<double> scales;
  std::optional<double> alpha, beta, c;
  bool dark_on_bright = false;
  bool save_vesselness = false;
  std::string format = "nifti";
};

int cmd_frangi(const Common& c, const FrangiOptions& o, const std::vector<std::string>& args) {
  RunConfig cfg = load_config(c);
  FrangiParams& p = cfg.frangi;
  if (!o.scales.empty()) p.scales_mm = o.scales;
  if (o.alpha) p.alpha = *o.alpha;
  if (o.beta) p.beta = *o.beta;
  if (o.c) p.c = *o.c;
  if (o.dark_on_bright) p.bright_on_dark = false;
  p.validate();
  const VolumeFormat fmt = parse_format(o.format);
  for (const InputItem& item : resolve_inputs(o.inputs, cfg)) {
    const Volume v = zscore_normalize(load_volume(item.path));
    Volume vesselness;
    const Volume seg = frangi_otsu_segment(v, p, &vesselness);
    save_volume(seg, output_path(o.out, item, "_seg", fmt), fmt);
    if (o.save_vesselness) save_volume(vesselness, output_path(o.out, item, "_vesselness", fmt), fmt);
    spdlog::info("segmented {}", item.name);
  }
  if (o.out) write_provenance(*o.out, args, {{"frangi", frangi_json(p)}});
  return kExitOk;
}

// ---------------------------------------------------------------- main

void configure_logging(const Common& c) {
  spdlog::set_pattern("[%l] %v");
  spdlog::set_level(c.quiet ? spdlog::level::warn : c.verbose ? spdlog::level::debug : spdlog::level::info);
}

}  // namespace

int run(int argc, const char* const* argv) {
  std::vector<std::string> args(argv, argv + argc);
  return run(args);
}

int run(const std::vector<std::string>& args) {
  CLI::App app{"Multi-task vessel segmentation with an auxiliary modality"};
  app.set_version_flag("--version", std::string(code_version()));
  app.require_subcommand(1);
  Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", common.config, "TOML run configuration")->check(CLI::ExistingFile);
    sub->add_flag("-v,--verbose", common.verbose, "debug logging");
    sub->add_flag("-q,--quiet", common.quiet, "warnings and errors only");
  };
  auto add_inputs = [](CLI::App* sub, Inputs& in) {
    sub->add_option("-i,--input", in.files, "input volume(s)");
    sub->add_option("--data", in.manifest, "dataset manifest; predicts every record with --role");
    sub->add_option("--role", in.role, "manifest role to process (triplet, pair, test)")->capture_default_str();
    sub->add_option("--image", in.image, "manifest image to process (source, auxiliary)")->capture_default_str();
  };

  GenOptions gen;
  CLI::App* gen_cmd = app.add_subcommand("gen", "generate a synthetic phantom dataset");
  add_common(gen_cmd);
  gen_cmd->add_option("-o,--out", gen.out, "output directory");
  gen_cmd->add_option("--triplets", gen.triplets, "labelled cases with auxiliary image");
  gen_cmd->add_option("--pairs", gen.pairs, "unlabelled cases with auxiliary image");
  gen_cmd->add_option("--test", gen.test, "labelled test cases");
  gen_cmd->add_option("--seed", gen.seed, "master seed");
  gen_cmd->add_option("--format", gen.format, "nifti or raw");
  gen_cmd->add_option("--native-contrast", gen.native_contrast, "vessel contrast in the source image");

  TrainOptions tr;
  CLI::App* train_cmd = app.add_subcommand("train", "train a model with one of the regimes");
  add_common(train_cmd);
  train_cmd->add_option("--data", tr.data, "dataset manifest");
  train_cmd->add_option("-o,--out", tr.out, "run directory (checkpoints, logs)");
  train_cmd->add_option("--regime", tr.regime, "unet, ynet, ynet-mix or ynet-tl");
  train_cmd->add_option("--epochs", tr.epochs, "epochs (pretraining epochs for ynet-tl)");
  train_cmd->add_option("--finetune-epochs", tr.finetune_epochs, "ynet-tl fine-tuning epochs");
  train_cmd->add_option("--triplets", tr.triplets, "use the first N triplets of the manifest");
  train_cmd->add_option("--pairs", tr.pairs, "use the first N pairs of the manifest");
  train_cmd->add_option("--lr", tr.lr, "learning rate");
  train_cmd->add_option("--seed", tr.seed, "run seed");
  train_cmd->add_option("--sigma-mode", tr.sigma_mode, "learned or fixed");
  train_cmd->add_option("--fixed-sigmas", tr.fixed_sigmas, "sigma_S sigma_T for fixed mode")->expected(2);
  train_cmd->add_option("--sigma-checkpoint", tr.sigma_checkpoint, "take fixed sigmas from this checkpoint");
  train_cmd->add_option("--validation", tr.validation, "held-out case ids for best-checkpoint selection");
  train_cmd->add_option("--resume", tr.resume, "resume from a checkpoint");

  PredictOptions pr;
  CLI::App* predict_cmd = app.add_subcommand("predict", "sliding-window prediction");
  add_common(predict_cmd);
  predict_cmd->add_option("--checkpoint", pr.checkpoint, "model checkpoint")->required()->check(CLI::ExistingFile);
  add_inputs(predict_cmd, pr.inputs);
  predict_cmd->add_option("-o,--out", pr.out, "output directory (default: next to each input)");
  predict_cmd->add_option("--patch", pr.patch, "patch size x y z")->expected(3);
  predict_cmd->add_option("--stride", pr.stride, "stride x y z")->expected(3);
  predict_cmd->add_option("--format", pr.format, "nifti or raw")->capture_default_str();

  EvalOptions ev;
  CLI::App* eval_cmd = app.add_subcommand("eval", "global and thickness-stratified metrics");
  add_common(eval_cmd);
  eval_cmd->add_option("--gt", ev.gt, "ground-truth label volume");
  eval_cmd->add_option("--pred", ev.pred, "predicted label volume");
  eval_cmd->add_option("--liver", ev.liver, "liver mask (enables VVR)");
  eval_cmd->add_option("--data", ev.data, "dataset manifest (batch mode)");
  eval_cmd->add_option("--pred-dir", ev.pred_dir, "directory with <id>_seg volumes (batch mode)");
  eval_cmd->add_option("--role", ev.role, "manifest role to evaluate")->capture_default_str();
  eval_cmd->add_option("--model", ev.model, "model name written to stratified.csv")->capture_default_str();
  eval_cmd->add_option("-o,--out", ev.out, "output directory (default: CSV rows on stdout)");
  eval_cmd->add_option("--workers", ev.workers, "cases evaluated in parallel")->capture_default_str();
  eval_cmd->add_flag("--vvr-reciprocal", ev.vvr_reciprocal, "report vessel/liver instead of liver/vessel");
  eval_cmd->add_flag("--no-stratified", ev.no_stratified, "skip thickness-stratified metrics");

  FrangiOptions fr;
  CLI::App* frangi_cmd = app.add_subcommand("baseline-frangi", "Frangi vesselness with Otsu thresholding");
  add_common(frangi_cmd);
  add_inputs(frangi_cmd, fr.inputs);
  frangi_cmd->add_option("-o,--out", fr.out, "output directory (default: next to each input)");
  frangi_cmd->add_option("--scales", fr.scales, "Gaussian scales in mm");
  frangi_cmd->add_option("--alpha", fr.alpha, "plate/line sensitivity");
  frangi_cmd->add_option("--beta", fr.beta, "blob sensitivity");
  frangi_cmd->add_option("--frangi-c", fr.c, "structureness constant (default: half the max Hessian norm)");
  frangi_cmd->add_flag("--dark-on-bright", fr.dark_on_bright, "detect dark vessels");
  frangi_cmd->add_flag("--save-vesselness", fr.save_vesselness, "also write <name>_vesselness");
  frangi_cmd->add_option("--format", fr.format, "nifti or raw")->capture_default_str();

  ReportOptions rp;
  CLI::App* report_cmd = app.add_subcommand("report", "aggregate evaluated runs into tables and a plot");
  add_common(report_cmd);
  report_cmd->add_option("--runs", rp.runs_dir, "directory searched for */eval/metrics.csv")->required();
  report_cmd->add_option("-o,--out", rp.out, "output directory (default: --runs)");

  try {
    std::vector<std::string> rest(args.rbegin(), args.rend() - 1);
    app.parse(rest);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  } catch (const CLI::CallForVersion& e) {
    app.exit(e);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  configure_logging(common);
  try {
    if (*gen_cmd) return cmd_gen(common, gen, args);
    if (*train_cmd) return cmd_train(common, tr);
    if (*predict_cmd) return cmd_predict(common, pr, args);
    if (*eval_cmd) return cmd_eval(common, ev, args);
    if (*frangi_cmd) return cmd_frangi(common, fr, args);
    if (*report_cmd) {
      if (!rp.out) rp.out = rp.runs_dir;
      write_report(rp);
      return kExitOk;
    }
  } catch (const UsageError& e) {
    spdlog::error("{}", e.what());
    return kExitUsage;
  } catch (const ArgumentError& e) {
    spdlog::error("{}", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace auxseg::cli
