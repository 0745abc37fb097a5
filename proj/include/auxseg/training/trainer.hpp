#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "auxseg/nets/checkpoint.hpp"
#include "auxseg/sampling/augment.hpp"
#include "auxseg/sampling/patch.hpp"
#include "auxseg/training/adam.hpp"
#include "auxseg/training/step.hpp"
#include "auxseg/volumes/manifest.hpp"

namespace auxseg::train {

/// unet: single-task CE on triplets. ynet: triplet steps, learned sigma.
/// ynet_mix: shuffled triplet and pair steps, fixed sigma. ynet_tl: pair-only
/// pretraining for `epochs`, then triplet fine-tuning for `finetune_epochs`.
enum class Regime { unet, ynet, ynet_mix, ynet_tl };

std::string_view to_string(Regime r);
Regime parse_regime(std::string_view text);  // accepts '-' or '_'

struct TrainConfig {
  Regime regime = Regime::ynet;
  int epochs = 100;
  int finetune_epochs = 40;
  double learning_rate = 1e-3;
  int batch_size = 1;
  PatchSpec patch;  // patch_size: training crop; stride: validation inference grid
  AugmentConfig augment;
  std::uint64_t seed = 0;  // drives initialisation, order, augmentation and crops
  nn::NetConfig net;

  // Sigma handling. Regime defaults: learned for ynet and ynet_tl, fixed
  // for ynet_mix. Fixed values come from fixed_sigmas, else from the sigmas
  // stored in sigma_checkpoint, else 1.0 each (with a warning).
  std::optional<nn::SigmaMode> sigma_mode;
  std::optional<std::pair<double, double>> fixed_sigmas;
  std::optional<std::filesystem::path> sigma_checkpoint;

  int max_triplets = -1;  // use the first N triplets of the manifest (-1: all)
  int max_pairs = -1;
  std::vector<std::string> validation_ids;  // held out; best.ckpt by mean Dice

  std::filesystem::path checkpoint_dir;  // empty: keep everything in memory
  bool keep_epoch_checkpoints = true;
  std::optional<std::filesystem::path> resume_from;

  void validate() const;
  nlohmann::json to_json() const;
};

struct EpochStats {
  int stage = 0;
  int epoch = 0;  // 1-based, counted across stages
  int steps = 0;
  double l_seg = 0.0;    // mean over steps that have it (NaN if none)
  double l_trans = 0.0;  // idem
  double total = 0.0;
  double sigma_seg = 1.0;
  double sigma_trans = 1.0;
  double val_dice = 0.0;  // NaN without validation cases
};

nlohmann::json to_json(const EpochStats& e);
EpochStats epoch_from_json(const nlohmann::json& j);

/// Mutable training state. Randomness is derived statelessly from
/// (seed, stage, epoch, case), so resuming at an epoch boundary replays the
/// same trajectory.
struct TrainState {
  nn::Model<float> model;
  Adam adam;
  int stage = 0;        // 0, or 1 for ynet_tl fine-tuning
  int stage_epoch = 0;  // completed epochs within the stage
  std::int64_t global_step = 0;
  std::vector<EpochStats> history;
};

/// One optimizer step on a labelled batch: CE for a U-Net, the uncertainty
/// weighted loss for a Y-Net.
StepGradients<float> train_step_triplet(TrainState& state, const PatchBatch<float>& batch);

/// One optimizer step on the translation loss alone. The segmentation
/// decoder, segmentation NDDR units, segmentation head and sigmas are left
/// bitwise unchanged. Throws ArgumentError for a U-Net.
StepGradients<float> train_step_pair(TrainState& state, const PatchBatch<float>& batch);

/// Builds the initial model for a configuration (sigma mode and fixed sigma
/// values resolved per regime).
nn::Model<float> initial_model(const TrainConfig& cfg);

/// Resolved fixed sigmas and where they came from.
std::pair<double, double> resolve_fixed_sigmas(const TrainConfig& cfg, std::string* source = nullptr);

struct TrainResult {
  nn::Checkpoint final;
  std::vector<EpochStats> history;
  std::optional<std::filesystem::path> best_checkpoint;
  double best_val_dice = 0.0;
};

/// Runs a full regime on the records of `data`. Writes config.json,
/// run.json, train_log.csv, last.ckpt, final.ckpt (and epoch / best
/// checkpoints) under cfg.checkpoint_dir when it is set.
TrainResult run_regime(const TrainConfig& cfg, const DatasetManifest& data);

/// Checkpoint of the current state with provenance in `info`.
nn::Checkpoint make_checkpoint(const TrainConfig& cfg, const TrainState& state);

}  // namespace auxseg::train
