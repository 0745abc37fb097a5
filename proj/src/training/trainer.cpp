#include "auxseg/training/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <limits>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "auxseg/inference/predict.hpp"
#include "auxseg/io_util.hpp"
#include "auxseg/metrics/metrics.hpp"
#include "auxseg/random.hpp"
#include "auxseg/version.hpp"
#include "auxseg/volumes/preprocess.hpp"

namespace auxseg::train {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Stream tags for derive_seed; fixed forever so runs stay reproducible.
constexpr std::uint64_t kOrderTag = 0x0bde;
constexpr std::uint64_t kAugmentTag = 0xa067;
constexpr std::uint64_t kCropTag = 0xc209;

// Uniform integer in [0, n) from raw 64-bit draws (rejection sampling), so
// the stream does not depend on the standard library's distributions.
std::uint64_t below(Rng& rng, std::uint64_t n) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % n;
}

template <typename V>
void shuffle(std::vector<V>& items, Rng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) std::swap(items[i - 1], items[below(rng, i)]);
}

json sigma_mode_json(const std::optional<nn::SigmaMode>& m) {
  return m ? json(std::string(nn::to_string(*m))) : json(nullptr);
}

double json_number(double v) { return std::isfinite(v) ? v : 0.0; }

}  // namespace

std::string_view to_string(Regime r) {
  switch (r) {
    case Regime::unet: return "unet";
    case Regime::ynet: return "ynet";
    case Regime::ynet_mix: return "ynet_mix";
    case Regime::ynet_tl: return "ynet_tl";
  }
  return "ynet";
}

Regime parse_regime(std::string_view text) {
  std::string t(text);
  for (char& c : t) c = c == '-' ? '_' : c;
  if (t == "unet") return Regime::unet;
  if (t == "ynet") return Regime::ynet;
  if (t == "ynet_mix") return Regime::ynet_mix;
  if (t == "ynet_tl") return Regime::ynet_tl;
  throw ArgumentError("unknown regime '" + std::string(text) + "' (expected unet, ynet, ynet-mix, ynet-tl)");
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ArgumentError("epochs must be >= 1");
  if (finetune_epochs < 0) throw ArgumentError("finetune_epochs must be >= 0");
  if (!(learning_rate >= 0.0)) throw ArgumentError("learning_rate must be >= 0");
  if (batch_size != 1) throw ArgumentError("only batch_size 1 is supported");
  patch.validate();
  augment.validate();
  net.validate();
  nn::check_input_extent(net, patch.patch_size);
  if (fixed_sigmas && (!(fixed_sigmas->first > 0.0) || !(fixed_sigmas->second > 0.0))) {
    throw ArgumentError("fixed sigmas must be > 0");
  }
}

json TrainConfig::to_json() const {
  json j;
  j["regime"] = std::string(to_string(regime));
  j["epochs"] = epochs;
  j["finetune_epochs"] = finetune_epochs;
  j["learning_rate"] = learning_rate;
  j["batch_size"] = batch_size;
  j["patch"] = {{"size", {patch.patch_size.x, patch.patch_size.y, patch.patch_size.z}},
                {"stride", {patch.stride.x, patch.stride.y, patch.stride.z}}};
  j["augment"] = {{"p_flip", augment.p_flip},
                  {"max_rotation_deg", augment.max_rotation_deg},
                  {"elastic",
                   {{"grid_spacing", augment.elastic.grid_spacing},
                    {"displacement_sigma", augment.elastic.displacement_sigma},
                    {"probability", augment.elastic.probability}}},
                  {"seed", augment.seed}};
  j["seed"] = seed;
  j["net"] = nn::config_to_json(net);
  j["sigma_mode"] = sigma_mode_json(sigma_mode);
  j["fixed_sigmas"] = fixed_sigmas ? json{fixed_sigmas->first, fixed_sigmas->second} : json(nullptr);
  j["sigma_checkpoint"] = sigma_checkpoint ? json(sigma_checkpoint->string()) : json(nullptr);
  j["max_triplets"] = max_triplets;
  j["max_pairs"] = max_pairs;
  j["validation_ids"] = validation_ids;
  return j;
}

json to_json(const EpochStats& e) {
  return json{{"stage", e.stage},
              {"epoch", e.epoch},
              {"steps", e.steps},
              {"l_seg", std::isfinite(e.l_seg) ? json(e.l_seg) : json(nullptr)},
              {"l_trans", std::isfinite(e.l_trans) ? json(e.l_trans) : json(nullptr)},
              {"total", e.total},
              {"sigma_seg", e.sigma_seg},
              {"sigma_trans", e.sigma_trans},
              {"val_dice", std::isfinite(e.val_dice) ? json(e.val_dice) : json(nullptr)}};
}

EpochStats epoch_from_json(const json& j) {
  auto num = [&](const char* key) { return j.at(key).is_null() ? kNaN : j.at(key).get<double>(); };
  EpochStats e;
  e.stage = j.at("stage").get<int>();
  e.epoch = j.at("epoch").get<int>();
  e.steps = j.at("steps").get<int>();
  e.l_seg = num("l_seg");
  e.l_trans = num("l_trans");
  e.total = j.at("total").get<double>();
  e.sigma_seg = j.at("sigma_seg").get<double>();
  e.sigma_trans = j.at("sigma_trans").get<double>();
  e.val_dice = num("val_dice");
  return e;
}

StepGradients<float> train_step_triplet(TrainState& state, const PatchBatch<float>& batch) {
  const StepKind kind = state.model.arch() == nn::Arch::unet ? StepKind::segmentation : StepKind::triplet;
  StepGradients<float> r = compute_gradients(state.model, batch, kind);
  state.adam.step(state.model, r.grads);
  ++state.global_step;
  return r;
}

StepGradients<float> train_step_pair(TrainState& state, const PatchBatch<float>& batch) {
  if (state.model.arch() != nn::Arch::ynet) throw ArgumentError("pair steps are not available for a U-Net");
  StepGradients<float> r = compute_gradients(state.model, batch, StepKind::pair);
  state.adam.step(state.model, r.grads);
  ++state.global_step;
  return r;
}

std::pair<double, double> resolve_fixed_sigmas(const TrainConfig& cfg, std::string* source) {
  if (cfg.fixed_sigmas) {
    if (source) *source = "config";
    return *cfg.fixed_sigmas;
  }
  if (cfg.sigma_checkpoint) {
    const nn::Checkpoint ck = nn::load_checkpoint(*cfg.sigma_checkpoint);
    if (ck.model.arch() != nn::Arch::ynet) {
      throw ArgumentError("sigma checkpoint " + cfg.sigma_checkpoint->string() + " is not a Y-Net");
    }
    if (source) *source = cfg.sigma_checkpoint->string();
    return {ck.model.sigma_seg(), ck.model.sigma_trans()};
  }
  spdlog::warn("no fixed sigmas given; using sigma_S = sigma_T = 1");
  if (source) *source = "default";
  return {1.0, 1.0};
}

nn::Model<float> initial_model(const TrainConfig& cfg) {
  nn::NetConfig net = cfg.net;
  net.init_seed = cfg.seed;
  if (cfg.regime == Regime::unet) return nn::build_unet<float>(net);
  nn::SigmaMode mode = cfg.regime == Regime::ynet_mix ? nn::SigmaMode::fixed : nn::SigmaMode::learned;
  if (cfg.sigma_mode) mode = *cfg.sigma_mode;
  nn::Model<float> m = nn::build_ynet<float>(net, mode);
  if (mode == nn::SigmaMode::fixed) {
    const auto [s, t] = resolve_fixed_sigmas(cfg);
    m.set_fixed_sigmas(s, t);
  }
  return m;
}

nn::Checkpoint make_checkpoint(const TrainConfig& cfg, const TrainState& state) {
  nn::Checkpoint ck;
  ck.model = state.model;
  state.adam.save_state(ck);
  json history = json::array();
  for (const auto& e : state.history) history.push_back(to_json(e));
  ck.info["regime"] = std::string(to_string(cfg.regime));
  ck.info["stage"] = state.stage;
  ck.info["stage_epoch"] = state.stage_epoch;
  ck.info["global_step"] = state.global_step;
  ck.info["seed"] = cfg.seed;
  ck.info["train_config"] = cfg.to_json();
  ck.info["code_version"] = std::string(code_version());
  ck.info["history"] = history;
  return ck;
}

namespace {

struct Visit {
  std::size_t sample;
  StepKind kind;
};

class Runner {
 public:
  Runner(const TrainConfig& cfg, const DatasetManifest& data) : cfg_(cfg) {
    cfg_.validate();
    select_data(data);
    if (!cfg_.checkpoint_dir.empty()) fs::create_directories(cfg_.checkpoint_dir);
  }

  TrainResult run() {
    TrainState state;
    if (cfg_.resume_from) {
      resume(state);
    } else {
      state.model = initial_model(cfg_);
      state.adam = Adam(AdamConfig{cfg_.learning_rate});
    }
    write_config();
    open_log(cfg_.resume_from.has_value());
    const auto started = std::chrono::steady_clock::now();

    const int stages = cfg_.regime == Regime::ynet_tl ? 2 : 1;
    for (; state.stage < stages; ++state.stage, state.stage_epoch = 0) {
      const int n_epochs = state.stage == 0 ? cfg_.epochs : cfg_.finetune_epochs;
      if (state.stage == 1 && state.stage_epoch == 0) {
        // Fine-tuning starts from the pretrained weights with a fresh optimizer.
        state.adam = Adam(AdamConfig{cfg_.learning_rate});
      }
      while (state.stage_epoch < n_epochs) {
        run_epoch(state, started);
        ++state.stage_epoch;
        save_epoch(state);
      }
    }
    state.stage = stages - 1;
    state.stage_epoch = cfg_.regime == Regime::ynet_tl ? cfg_.finetune_epochs : cfg_.epochs;

    TrainResult result;
    result.final = make_checkpoint(cfg_, state);
    result.history = state.history;
    result.best_val_dice = best_dice_;
    if (!cfg_.checkpoint_dir.empty()) {
      nn::save_checkpoint(result.final, cfg_.checkpoint_dir / "final.ckpt");
      if (has_best_) result.best_checkpoint = cfg_.checkpoint_dir / "best.ckpt";
      write_run_record(state, std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count());
    }
    return result;
  }

 private:
  void select_data(const DatasetManifest& data) {
    std::vector<const ManifestRecord*> triplets, pairs;
    for (const auto& r : data.records) {
      const bool held_out =
          std::find(cfg_.validation_ids.begin(), cfg_.validation_ids.end(), r.id) != cfg_.validation_ids.end();
      if (held_out) {
        if (!r.label) throw ArgumentError("validation case '" + r.id + "' has no label");
        validation_.push_back(load_normalized(r));
        continue;
      }
      if (r.role == SampleRole::triplet) triplets.push_back(&r);
      if (r.role == SampleRole::pair) pairs.push_back(&r);
    }
    if (validation_.size() != cfg_.validation_ids.size()) {
      throw ArgumentError("some validation ids are not in the manifest");
    }
    if (cfg_.max_triplets >= 0 && static_cast<std::size_t>(cfg_.max_triplets) < triplets.size()) {
      triplets.resize(cfg_.max_triplets);
    }
    if (cfg_.max_pairs >= 0 && static_cast<std::size_t>(cfg_.max_pairs) < pairs.size()) pairs.resize(cfg_.max_pairs);

    const bool uses_pairs = cfg_.regime == Regime::ynet_mix || cfg_.regime == Regime::ynet_tl;
    const bool uses_triplets = cfg_.regime != Regime::ynet_tl || cfg_.finetune_epochs > 0;
    if (!uses_pairs && !pairs.empty()) {
      spdlog::warn("{} regime ignores {} pair record(s)", to_string(cfg_.regime), pairs.size());
      pairs.clear();
    }
    if (uses_pairs && pairs.empty()) {
      throw ArgumentError(std::string(to_string(cfg_.regime)) + " regime needs pair records");
    }
    if (uses_triplets && triplets.empty()) {
      throw ArgumentError(std::string(to_string(cfg_.regime)) + " regime needs triplet records");
    }
    for (const auto* r : triplets) {
      triplet_idx_.push_back(samples_.size());
      samples_.push_back(load_normalized(*r));
    }
    for (const auto* r : pairs) {
      pair_idx_.push_back(samples_.size());
      samples_.push_back(load_normalized(*r));
    }
    for (const auto& s : samples_) {
      for (int a = 0; a < 3; ++a) {
        if (cfg_.patch.patch_size[a] > s.source.extent()[a]) {
          throw ArgumentError("training patch " + to_string(cfg_.patch.patch_size) + " exceeds case '" + s.id +
                              "' of extent " + to_string(s.source.extent()));
        }
      }
    }
    spdlog::info("training {} on {} triplet(s), {} pair(s), {} validation case(s)", to_string(cfg_.regime),
                 triplet_idx_.size(), pair_idx_.size(), validation_.size());
  }

  static Sample load_normalized(const ManifestRecord& r) {
    Sample s = load_sample(r);
    s.source = zscore_normalize(s.source);
    if (s.auxiliary) s.auxiliary = zscore_normalize(*s.auxiliary);
    return s;
  }

  std::vector<Visit> schedule(int stage, int epoch) const {
    std::vector<Visit> visits;
    const bool pretrain = cfg_.regime == Regime::ynet_tl && stage == 0;
    const StepKind labelled = cfg_.regime == Regime::unet ? StepKind::segmentation : StepKind::triplet;
    if (!pretrain) {
      for (std::size_t i : triplet_idx_) visits.push_back({i, labelled});
    }
    if (pretrain || cfg_.regime == Regime::ynet_mix) {
      for (std::size_t i : pair_idx_) visits.push_back({i, StepKind::pair});
    }
    Rng rng = make_rng({cfg_.seed, kOrderTag, static_cast<std::uint64_t>(stage), static_cast<std::uint64_t>(epoch)});
    shuffle(visits, rng);
    return visits;
  }

  PatchBatch<float> make_batch(const Sample& s, int stage, int epoch, std::size_t case_index) const {
    const std::uint64_t step_seed = derive_seed({cfg_.seed, kAugmentTag, static_cast<std::uint64_t>(stage),
                                                 static_cast<std::uint64_t>(epoch), case_index});
    const Sample a = augment_sample(s, cfg_.augment, step_seed);
    Rng rng = make_rng({cfg_.seed, kCropTag, static_cast<std::uint64_t>(stage), static_cast<std::uint64_t>(epoch),
                        case_index});
    const Extent3 size = cfg_.patch.patch_size;
    const Extent3 shape = a.source.extent();
    Index3 origin;
    for (int ax = 0; ax < 3; ++ax) {
      origin[ax] = static_cast<int>(below(rng, static_cast<std::uint64_t>(shape[ax] - size[ax] + 1)));
    }
    PatchBatch<float> b;
    b.source = nn::Tensor<float>(1, size);
    extract_region(a.source.values(), shape, origin, size, b.source.data);
    if (a.label) {
      b.label.resize(size.count());
      extract_region(a.label->values(), shape, origin, size, b.label);
    }
    if (a.auxiliary) {
      b.auxiliary.resize(size.count());
      extract_region(a.auxiliary->values(), shape, origin, size, b.auxiliary);
    }
    return b;
  }

  void run_epoch(TrainState& state, std::chrono::steady_clock::time_point started) {
    const int stage = state.stage;
    const int epoch_in_stage = state.stage_epoch;
    const int epoch = static_cast<int>(state.history.size()) + 1;
    const auto visits = schedule(stage, epoch_in_stage);
    double sum_seg = 0.0, sum_trans = 0.0, sum_total = 0.0;
    int n_seg = 0, n_trans = 0;
    for (const Visit& v : visits) {
      const Sample& s = samples_[v.sample];
      const PatchBatch<float> batch = make_batch(s, stage, epoch_in_stage, v.sample);
      StepGradients<float> r;
      try {
        r = v.kind == StepKind::pair ? train_step_pair(state, batch) : train_step_triplet(state, batch);
      } catch (const Error& e) {
        throw Error(fmt::format("epoch {}, step {}, case '{}': {}", epoch, state.global_step + 1, s.id, e.what()));
      }
      if (r.has_seg) {
        sum_seg += r.l_seg;
        ++n_seg;
      }
      if (r.has_trans) {
        sum_trans += r.l_trans;
        ++n_trans;
      }
      sum_total += r.total;
      log_step(state, epoch, s.id, v.kind, r, std::chrono::steady_clock::now() - started);
    }
    EpochStats e;
    e.stage = stage;
    e.epoch = epoch;
    e.steps = static_cast<int>(visits.size());
    e.l_seg = n_seg ? sum_seg / n_seg : kNaN;
    e.l_trans = n_trans ? sum_trans / n_trans : kNaN;
    e.total = visits.empty() ? kNaN : sum_total / static_cast<double>(visits.size());
    e.sigma_seg = state.model.sigma_seg();
    e.sigma_trans = state.model.sigma_trans();
    e.val_dice = validate_epoch(state);
    state.history.push_back(e);
    spdlog::info("epoch {} (stage {}): total {:.4f}  L_S {}  L_T {}  sigma {:.3f}/{:.3f}{}", epoch, stage, e.total,
                 metrics::format_number(e.l_seg), metrics::format_number(e.l_trans), e.sigma_seg, e.sigma_trans,
                 std::isfinite(e.val_dice) ? fmt::format("  val dice {:.4f}", e.val_dice) : std::string());
  }

  double validate_epoch(const TrainState& state) {
    if (validation_.empty()) return kNaN;
    // Only fine-tuned / labelled stages produce meaningful segmentations.
    if (cfg_.regime == Regime::ynet_tl && state.stage == 0) return kNaN;
    double sum = 0.0;
    for (const Sample& s : validation_) {
      const PredictionResult p = predict_volume(state.model, s.source, cfg_.patch);
      sum += metrics::dice(metrics::confusion(*s.label, p.segmentation));
    }
    const double mean = sum / static_cast<double>(validation_.size());
    if (!has_best_ || mean > best_dice_) {
      has_best_ = true;
      best_dice_ = mean;
      pending_best_ = true;
    }
    return mean;
  }

  void save_epoch(const TrainState& state) {
    if (cfg_.checkpoint_dir.empty()) return;
    const nn::Checkpoint ck = make_checkpoint(cfg_, state);
    const std::string bytes = nn::serialize_checkpoint(ck);
    write_file_atomic(cfg_.checkpoint_dir / "last.ckpt", bytes);
    if (cfg_.keep_epoch_checkpoints) {
      write_file_atomic(cfg_.checkpoint_dir / fmt::format("epoch_{:03d}.ckpt", state.history.size()), bytes);
    }
    if (pending_best_) {
      write_file_atomic(cfg_.checkpoint_dir / "best.ckpt", bytes);
      pending_best_ = false;
    }
    log_.flush();
  }

  void resume(TrainState& state) {
    const nn::Checkpoint ck = nn::load_checkpoint(*cfg_.resume_from);
    json expected = cfg_.to_json();
    json stored = ck.info.at("train_config");
    // Only the schedule length may differ between the original run and a resume.
    for (auto* j : {&expected, &stored}) {
      j->erase("epochs");
      j->erase("finetune_epochs");
    }
    if (expected != stored) throw ArgumentError("resume checkpoint was produced by a different configuration");
    state.model = ck.model;
    state.adam = Adam(AdamConfig{cfg_.learning_rate});
    state.adam.load_state(ck);
    state.stage = ck.info.at("stage").get<int>();
    state.stage_epoch = ck.info.at("stage_epoch").get<int>();
    state.global_step = ck.info.at("global_step").get<std::int64_t>();
    for (const auto& e : ck.info.at("history")) state.history.push_back(epoch_from_json(e));
    for (const auto& e : state.history) {
      if (std::isfinite(e.val_dice) && (!has_best_ || e.val_dice > best_dice_)) {
        has_best_ = true;
        best_dice_ = e.val_dice;
      }
    }
    const int stage_len = state.stage == 0 ? cfg_.epochs : cfg_.finetune_epochs;
    if (state.stage_epoch >= stage_len && cfg_.regime == Regime::ynet_tl && state.stage == 0) {
      state.stage = 1;
      state.stage_epoch = 0;
    }
    spdlog::info("resuming {} at stage {}, epoch {} (step {})", to_string(cfg_.regime), state.stage,
                 state.history.size(), state.global_step);
  }

  void write_config() {
    if (cfg_.checkpoint_dir.empty()) return;
    write_file_atomic(cfg_.checkpoint_dir / "config.json", cfg_.to_json().dump(2) + "\n");
  }

  void open_log(bool append) {
    if (cfg_.checkpoint_dir.empty()) return;
    const fs::path path = cfg_.checkpoint_dir / "train_log.csv";
    const bool fresh = !append || !fs::exists(path);
    log_.open(path, fresh ? std::ios::trunc : std::ios::app);
    if (!log_) throw Error("cannot write " + path.string());
    if (fresh) log_ << "epoch,step,regime,l_seg,l_trans,sigma_seg,sigma_trans,total,wall_time,stage,case,kind\n";
  }

  void log_step(const TrainState& state, int epoch, const std::string& id, StepKind kind,
                const StepGradients<float>& r, std::chrono::steady_clock::duration wall) {
    if (!log_.is_open()) return;
    const char* kind_name = kind == StepKind::pair ? "pair" : (kind == StepKind::triplet ? "triplet" : "labelled");
    log_ << fmt::format("{},{},{},{},{},{:.6g},{:.6g},{:.8g},{:.3f},{},{},{}\n", epoch, state.global_step,
                        to_string(cfg_.regime), r.has_seg ? fmt::format("{:.8g}", r.l_seg) : "",
                        r.has_trans ? fmt::format("{:.8g}", r.l_trans) : "", state.model.sigma_seg(),
                        state.model.sigma_trans(), r.total, std::chrono::duration<double>(wall).count(), state.stage,
                        id, kind_name);
  }

  void write_run_record(const TrainState& state, double seconds) {
    json run;
    run["code_version"] = std::string(code_version());
    run["library_version"] = std::string(library_version());
    run["config"] = cfg_.to_json();
    run["seed"] = cfg_.seed;
    run["steps"] = state.global_step;
    run["wall_time_s"] = seconds;
    run["deterministic_cpu"] = true;
    run["finished_at_unix"] = static_cast<std::int64_t>(std::time(nullptr));
    run["best_val_dice"] = has_best_ ? json(json_number(best_dice_)) : json(nullptr);
    run["sigma"] = {{"seg", state.model.sigma_seg()}, {"trans", state.model.sigma_trans()}};
    json ids = {{"triplets", json::array()}, {"pairs", json::array()}};
    for (std::size_t i : triplet_idx_) ids["triplets"].push_back(samples_[i].id);
    for (std::size_t i : pair_idx_) ids["pairs"].push_back(samples_[i].id);
    run["cases"] = ids;
    write_file_atomic(cfg_.checkpoint_dir / "run.json", run.dump(2) + "\n");
  }

  TrainConfig cfg_;
  std::vector<Sample> samples_;
  std::vector<std::size_t> triplet_idx_, pair_idx_;
  std::vector<Sample> validation_;
  std::ofstream log_;
  bool has_best_ = false;
  bool pending_best_ = false;
  double best_dice_ = 0.0;
};

}  // namespace

TrainResult run_regime(const TrainConfig& cfg, const DatasetManifest& data) { return Runner(cfg, data).run(); }

}  // namespace auxseg::train
