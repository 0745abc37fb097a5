#include "auxseg/nets/checkpoint.hpp"

#include <bit>
#include <cstring>

#include "auxseg/io_util.hpp"
#include "auxseg/zip_archive.hpp"

namespace auxseg::nn {

using nlohmann::json;

namespace {

constexpr int kFormatVersion = 1;

std::string to_bytes(std::span<const float> values) {
  static_assert(std::endian::native == std::endian::little, "checkpoint blobs assume a little-endian host");
  std::string out(values.size() * sizeof(float), '\0');
  std::memcpy(out.data(), values.data(), out.size());
  return out;
}

std::vector<float> from_bytes(const std::string& bytes, std::size_t expected, const std::string& what) {
  if (bytes.size() != expected * sizeof(float)) {
    throw FormatError("checkpoint blob '" + what + "' has " + std::to_string(bytes.size()) + " bytes, expected " +
                      std::to_string(expected * sizeof(float)));
  }
  std::vector<float> out(expected);
  std::memcpy(out.data(), bytes.data(), bytes.size());
  return out;
}

const std::string& entry(const std::map<std::string, std::string>& files, const std::string& name) {
  const auto it = files.find(name);
  if (it == files.end()) throw FormatError("checkpoint is missing '" + name + "'");
  return it->second;
}

}  // namespace

json config_to_json(const NetConfig& cfg) {
  return json{{"in_channels", cfg.in_channels},
              {"seg_classes", cfg.seg_classes},
              {"base_width", cfg.base_width},
              {"levels", cfg.levels},
              {"groupnorm_groups", cfg.groupnorm_groups},
              {"nddr_enabled", cfg.nddr_enabled},
              {"nddr_init", std::string(to_string(cfg.nddr_init))},
              {"init_seed", cfg.init_seed}};
}

NetConfig config_from_json(const json& j) {
  NetConfig cfg;
  cfg.in_channels = j.at("in_channels").get<int>();
  cfg.seg_classes = j.at("seg_classes").get<int>();
  cfg.base_width = j.at("base_width").get<int>();
  cfg.levels = j.at("levels").get<int>();
  cfg.groupnorm_groups = j.at("groupnorm_groups").get<int>();
  cfg.nddr_enabled = j.at("nddr_enabled").get<bool>();
  cfg.nddr_init = parse_nddr_init(j.at("nddr_init").get<std::string>());
  cfg.init_seed = j.at("init_seed").get<std::uint64_t>();
  cfg.validate();
  return cfg;
}

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  const Model<float>& m = ckpt.model;
  ZipWriter zip;
  json params = json::array();
  for (const auto& p : m.parameters()) {
    const std::string file = "params/" + p.name + ".f32";
    params.push_back({{"name", p.name}, {"shape", p.shape}, {"group", to_string(p.group)}, {"file", file}});
    zip.add(file, to_bytes(p.value));
  }
  json blobs = json::object();
  for (const auto& [key, values] : ckpt.blobs) {
    const std::string file = "state/" + key + ".f32";
    blobs[key] = {{"file", file}, {"size", values.size()}};
    zip.add(file, to_bytes(values));
  }
  json manifest = {{"format_version", kFormatVersion},
                   {"arch", std::string(to_string(m.arch()))},
                   {"sigma_mode", std::string(to_string(m.sigma_mode()))},
                   {"sigma", {{"seg", m.sigma_seg()}, {"trans", m.sigma_trans()}}},
                   {"config", config_to_json(m.config())},
                   {"parameters", params},
                   {"blobs", blobs},
                   {"info", ckpt.info}};
  zip.add("manifest.json", manifest.dump(2));
  return zip.finish();
}

Checkpoint deserialize_checkpoint(std::string_view bytes) {
  const auto files = read_zip(bytes);
  json manifest;
  try {
    manifest = json::parse(entry(files, "manifest.json"));
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("checkpoint manifest is not valid JSON: ") + e.what());
  }
  try {
    if (manifest.at("format_version").get<int>() != kFormatVersion) {
      throw FormatError("unsupported checkpoint format version " + manifest.at("format_version").dump());
    }
    const NetConfig cfg = config_from_json(manifest.at("config"));
    const Arch arch = parse_arch(manifest.at("arch").get<std::string>());
    const SigmaMode mode = parse_sigma_mode(manifest.at("sigma_mode").get<std::string>());
    Checkpoint ckpt;
    ckpt.model = build_model<float>(cfg, arch, mode);
    if (arch == Arch::ynet && mode == SigmaMode::fixed) {
      ckpt.model.set_fixed_sigmas(manifest.at("sigma").at("seg").get<double>(),
                                  manifest.at("sigma").at("trans").get<double>());
    }
    const auto& table = manifest.at("parameters");
    if (table.size() != ckpt.model.parameters().size()) {
      throw FormatError("checkpoint lists " + std::to_string(table.size()) + " parameters, model has " +
                        std::to_string(ckpt.model.parameters().size()));
    }
    for (const auto& row : table) {
      auto& p = ckpt.model.parameter(row.at("name").get<std::string>());
      if (row.at("shape").get<std::vector<int>>() != p.shape) throw FormatError("shape mismatch for '" + p.name + "'");
      p.value = from_bytes(entry(files, row.at("file").get<std::string>()), p.size(), p.name);
    }
    for (const auto& [key, row] : manifest.at("blobs").items()) {
      ckpt.blobs[key] = from_bytes(entry(files, row.at("file").get<std::string>()), row.at("size").get<std::size_t>(), key);
    }
    ckpt.info = manifest.value("info", json::object());
    return ckpt;
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed checkpoint manifest: ") + e.what());
  } catch (const ArgumentError& e) {
    throw FormatError(std::string("malformed checkpoint manifest: ") + e.what());
  }
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  try {
    return deserialize_checkpoint(read_file(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace auxseg::nn
