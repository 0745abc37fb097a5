#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "auxseg/volumes/volume.hpp"

namespace auxseg {

struct ManifestRecord {
  std::string id;
  SampleRole role = SampleRole::test;
  std::filesystem::path source;
  std::optional<std::filesystem::path> auxiliary;
  std::optional<std::filesystem::path> label;
  std::optional<std::filesystem::path> liver_mask;
  std::optional<std::uint64_t> seed;  // generator seed, when synthetic
};

/// List of dataset records. Paths in `records` are absolute (resolved
/// against `root` on load); they are written relative to the manifest.
struct DatasetManifest {
  std::filesystem::path root;
  std::vector<ManifestRecord> records;

  std::vector<const ManifestRecord*> with_role(SampleRole role) const;
  const ManifestRecord& find(const std::string& id) const;
};

/// Parses {"records":[{"id","role","source","auxiliary","label","liver_mask"}]}.
/// Checks id uniqueness, role/field consistency and file existence. An empty
/// record list is allowed and logs a warning.
DatasetManifest load_manifest(const std::filesystem::path& path);

/// Writes the manifest with paths relative to the manifest's directory.
void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

/// Reads all volumes of one record. Labels and liver masks are binarized.
Sample load_sample(const ManifestRecord& record);

/// Options for converting a Medical Segmentation Decathlon task directory
/// (dataset.json + imagesTr/ + labelsTr/) into a manifest.
struct DecathlonOptions {
  std::string source_channel = "T2w";     // modality name or index
  std::string auxiliary_channel = "t1gd";  // modality name or index
  std::vector<int> label_ids = {2, 3};     // merged into the binary label
  int n_triplets = 8;                      // first cases after shuffling
  int n_pairs = 30;                        // next cases; label dropped
  int n_test = -1;                         // remaining cases (-1: all)
  std::uint64_t seed = 0;
};

/// Splits each 4D case into source/auxiliary NIfTI volumes and a binary label
/// written under `output_dir`, and writes output_dir/manifest.json.
/// Throws for missing files, unknown channels and unknown label ids.
DatasetManifest ingest_decathlon(const std::filesystem::path& task_dir, const std::filesystem::path& output_dir,
                                 const DecathlonOptions& options);

}  // namespace auxseg
