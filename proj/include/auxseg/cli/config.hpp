#pragma once

#include <filesystem>
#include <optional>
#include <string_view>

#include "auxseg/frangi/frangi.hpp"
#include "auxseg/synthdata/phantom.hpp"
#include "auxseg/training/trainer.hpp"

namespace auxseg::cli {

struct GenSettings {
  int n_triplets = 12;
  int n_pairs = 30;
  int n_test = 6;
  VolumeFormat format = VolumeFormat::nifti;
};

/// Everything a run can be configured with, read from one TOML file:
///
///   [paths]    data (manifest), output
///   [train]    regime, epochs, finetune_epochs, learning_rate, batch_size,
///              seed, sigma_mode, fixed_sigmas, sigma_checkpoint,
///              max_triplets, max_pairs, validation_ids,
///              keep_epoch_checkpoints, resume_from
///   [patch]    size, stride
///   [augment]  p_flip, max_rotation_deg, elastic_probability,
///              elastic_sigma, elastic_grid_spacing, seed
///   [net]      base_width, levels, groupnorm_groups, nddr, nddr_init
///   [phantom]  shape, spacing_mm, n_trees, root_radius_mm, branch_levels,
///              radius_decay, radius_jitter, native_contrast,
///              contrast_enhanced, noise_sigma, bias_field_amplitude,
///              background_intensity, liver_fraction, seed
///   [gen]      n_triplets, n_pairs, n_test, format ("nifti" | "raw")
///   [frangi]   scales_mm, alpha, beta, c, bright_on_dark
///
/// Unknown sections or keys are rejected. Relative paths are resolved
/// against the directory of the config file.
struct RunConfig {
  std::optional<std::filesystem::path> data;
  std::optional<std::filesystem::path> output;
  train::TrainConfig train;
  synth::PhantomConfig phantom;
  GenSettings gen;
  FrangiParams frangi;
};

/// Throws ArgumentError with the offending key for unknown keys, wrong
/// types and syntax errors.
RunConfig parse_run_config(std::string_view text, const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace auxseg::cli
