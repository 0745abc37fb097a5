#include "auxseg/volumes/manifest.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <json.hpp>
#include <random>
#include <set>

#include "auxseg/io_util.hpp"
#include "auxseg/volumes/volume_io.hpp"

namespace auxseg {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

fs::path resolve(const fs::path& root, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() ? path : (root / path).lexically_normal();
}

std::optional<fs::path> optional_path(const json& j, const char* key, const fs::path& root) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  const auto text = j.at(key).get<std::string>();
  if (text.empty()) return std::nullopt;
  return resolve(root, text);
}

void require_exists(const fs::path& p, const std::string& id) {
  if (!fs::exists(p)) throw Error("manifest record '" + id + "': missing file '" + p.string() + "'");
  if (detect_format(p) == VolumeFormat::raw_json) {
    if (!fs::exists(raw_sidecar_path(p)) || !fs::exists(raw_data_path(p))) {
      throw Error("manifest record '" + id + "': raw volume '" + p.string() + "' needs both .raw and .json");
    }
  }
}

std::string relative_to(const fs::path& p, const fs::path& root) {
  if (root.empty()) return p.string();
  const fs::path rel = p.lexically_relative(root);
  return rel.empty() ? p.string() : rel.generic_string();
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

// Channel by index or by modality name; names compare case-insensitively
// ("t1gd" and "T1gd" both occur in published task files).
int resolve_channel(const json& modality, const std::string& wanted) {
  if (!wanted.empty() && std::all_of(wanted.begin(), wanted.end(), ::isdigit)) return std::stoi(wanted);
  for (const auto& [key, name] : modality.items()) {
    if (lower(name.get<std::string>()) == lower(wanted)) return std::stoi(key);
  }
  throw ArgumentError("decathlon dataset has no modality named '" + wanted + "'");
}

}  // namespace

std::vector<const ManifestRecord*> DatasetManifest::with_role(SampleRole role) const {
  std::vector<const ManifestRecord*> out;
  for (const auto& r : records) {
    if (r.role == role) out.push_back(&r);
  }
  return out;
}

const ManifestRecord& DatasetManifest::find(const std::string& id) const {
  for (const auto& r : records) {
    if (r.id == id) return r;
  }
  throw ArgumentError("manifest has no record '" + id + "'");
}

DatasetManifest load_manifest(const fs::path& path) {
  json doc;
  try {
    doc = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw FormatError("cannot parse manifest '" + path.string() + "': " + e.what());
  }
  DatasetManifest manifest;
  manifest.root = fs::absolute(path).parent_path();
  if (!doc.contains("records") || !doc.at("records").is_array()) {
    throw FormatError("manifest '" + path.string() + "' lacks a \"records\" array");
  }
  std::set<std::string> seen;
  try {
    for (const auto& j : doc.at("records")) {
      ManifestRecord r;
      r.id = j.at("id").get<std::string>();
      if (!seen.insert(r.id).second) throw FormatError("duplicate manifest id '" + r.id + "'");
      r.role = parse_sample_role(j.at("role").get<std::string>());
      r.source = resolve(manifest.root, j.at("source").get<std::string>());
      r.auxiliary = optional_path(j, "auxiliary", manifest.root);
      r.label = optional_path(j, "label", manifest.root);
      r.liver_mask = optional_path(j, "liver_mask", manifest.root);
      if (j.contains("seed")) r.seed = j.at("seed").get<std::uint64_t>();

      if (r.role == SampleRole::triplet && (!r.auxiliary || !r.label)) {
        throw FormatError("triplet '" + r.id + "' needs auxiliary and label");
      }
      if (r.role == SampleRole::pair && (!r.auxiliary || r.label)) {
        throw FormatError("pair '" + r.id + "' needs auxiliary and no label");
      }
      require_exists(r.source, r.id);
      for (const auto* p : {&r.auxiliary, &r.label, &r.liver_mask}) {
        if (*p) require_exists(**p, r.id);
      }
      manifest.records.push_back(std::move(r));
    }
  } catch (const json::exception& e) {
    throw FormatError("malformed manifest '" + path.string() + "': " + e.what());
  }
  if (manifest.records.empty()) spdlog::warn("manifest '{}' has no records; dataset is empty", path.string());
  return manifest;
}

void save_manifest(const DatasetManifest& manifest, const fs::path& path) {
  const fs::path root = fs::absolute(path).parent_path();
  json records = json::array();
  for (const auto& r : manifest.records) {
    json j = {{"id", r.id}, {"role", std::string(to_string(r.role))}, {"source", relative_to(r.source, root)}};
    if (r.auxiliary) j["auxiliary"] = relative_to(*r.auxiliary, root);
    if (r.label) j["label"] = relative_to(*r.label, root);
    if (r.liver_mask) j["liver_mask"] = relative_to(*r.liver_mask, root);
    if (r.seed) j["seed"] = *r.seed;
    records.push_back(std::move(j));
  }
  write_file_atomic(path, json{{"records", records}}.dump(2) + "\n");
}

Sample load_sample(const ManifestRecord& record) {
  Sample s;
  s.id = record.id;
  s.role = record.role;
  s.source = load_volume(record.source, VolumeKind::intensity);
  if (record.auxiliary) s.auxiliary = load_volume(*record.auxiliary, VolumeKind::intensity);
  if (record.label) s.label = load_volume(*record.label, VolumeKind::label);
  if (record.liver_mask) s.liver_mask = load_volume(*record.liver_mask, VolumeKind::label);
  s.validate();
  return s;
}

DatasetManifest ingest_decathlon(const fs::path& task_dir, const fs::path& output_dir, const DecathlonOptions& options) {
  const fs::path dataset_json = task_dir / "dataset.json";
  if (!fs::exists(dataset_json)) throw Error("missing file '" + dataset_json.string() + "'");
  json doc;
  try {
    doc = json::parse(read_file(dataset_json));
  } catch (const json::exception& e) {
    throw FormatError("cannot parse '" + dataset_json.string() + "': " + e.what());
  }
  const json modality = doc.value("modality", json::object());
  const int source_channel = resolve_channel(modality, options.source_channel);
  const int aux_channel = resolve_channel(modality, options.auxiliary_channel);
  const json labels = doc.value("labels", json::object());
  for (int id : options.label_ids) {
    if (!labels.contains(std::to_string(id))) {
      throw ArgumentError("unknown label id " + std::to_string(id) + " for decathlon task '" + task_dir.string() + "'");
    }
  }

  struct Case {
    std::string id;
    fs::path image;
    fs::path label;
  };
  std::vector<Case> cases;
  for (const auto& entry : doc.at("training")) {
    Case c;
    c.image = resolve(task_dir, entry.at("image").get<std::string>());
    c.label = resolve(task_dir, entry.at("label").get<std::string>());
    std::string stem = c.image.filename().string();
    if (const auto dot = stem.find('.'); dot != std::string::npos) stem.resize(dot);
    c.id = stem;
    if (!fs::exists(c.image)) throw Error("missing file '" + c.image.string() + "'");
    if (!fs::exists(c.label)) throw Error("missing file '" + c.label.string() + "'");
    cases.push_back(std::move(c));
  }
  std::mt19937_64 rng(options.seed);
  std::shuffle(cases.begin(), cases.end(), rng);

  const std::set<int> wanted(options.label_ids.begin(), options.label_ids.end());
  DatasetManifest manifest;
  manifest.root = fs::absolute(output_dir);
  const int n = static_cast<int>(cases.size());
  const int n_triplets = std::min(options.n_triplets, n);
  const int n_pairs = std::min(options.n_pairs, n - n_triplets);
  const int n_rest = n - n_triplets - n_pairs;
  const int n_test = options.n_test < 0 ? n_rest : std::min(options.n_test, n_rest);
  for (int i = 0; i < n_triplets + n_pairs + n_test; ++i) {
    const Case& c = cases[i];
    ManifestRecord r;
    r.id = c.id;
    r.role = i < n_triplets ? SampleRole::triplet : (i < n_triplets + n_pairs ? SampleRole::pair : SampleRole::test);

    const Volume source = load_nifti_channel(c.image, source_channel, VolumeKind::intensity);
    r.source = manifest.root / (c.id + "_source.nii.gz");
    save_volume(source, r.source);
    if (r.role != SampleRole::test) {
      const Volume aux = load_nifti_channel(c.image, aux_channel, VolumeKind::intensity);
      r.auxiliary = manifest.root / (c.id + "_aux.nii.gz");
      save_volume(aux, *r.auxiliary);
    }
    if (r.role != SampleRole::pair) {
      const NiftiImage raw_label = read_nifti(c.label);
      std::vector<float> binary(raw_label.geometry.extent.count());
      for (std::size_t v = 0; v < binary.size(); ++v) {
        binary[v] = wanted.count(static_cast<int>(std::lround(raw_label.values[v]))) ? 1.0f : 0.0f;
      }
      const Volume label(raw_label.geometry, std::move(binary), VolumeKind::label);
      if (!same_grid(label.geometry(), source.geometry())) {
        throw FormatError("decathlon case '" + c.id + "': label grid does not match image grid");
      }
      r.label = manifest.root / (c.id + "_label.nii.gz");
      save_volume(label, *r.label);
    }
    manifest.records.push_back(std::move(r));
  }
  save_manifest(manifest, output_dir / "manifest.json");
  return manifest;
}

}  // namespace auxseg
