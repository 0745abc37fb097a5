#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "auxseg/nets/model.hpp"

namespace auxseg::nn {

/// Serialized model plus whatever the training loop wants to keep with it.
/// Stored as a ZIP archive:
///   manifest.json               config, arch, sigma mode and values, parameter
///                               table, `info` (provenance) and blob table
///   params/<name>.f32           little-endian float32, one per parameter
///   state/<key>.f32             extra float arrays (optimizer moments)
struct Checkpoint {
  Model<float> model;
  nlohmann::json info = nlohmann::json::object();
  std::map<std::string, std::vector<float>> blobs;
};

nlohmann::json config_to_json(const NetConfig& cfg);
NetConfig config_from_json(const nlohmann::json& j);

/// Serialized archive bytes (deterministic for equal inputs).
std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(std::string_view bytes);

/// Atomic write (temp file + rename).
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace auxseg::nn
