#include "auxseg/volumes/volume_io.hpp"

#include <zlib.h>

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <json.hpp>

#include "auxseg/io_util.hpp"

namespace auxseg {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr int kNiftiHeaderSize = 348;
constexpr int kNiftiDataOffset = 352;

// NIfTI-1 datatype codes.
enum : short {
  kUInt8 = 2,
  kInt16 = 4,
  kInt32 = 8,
  kFloat32 = 16,
  kFloat64 = 64,
  kInt8 = 256,
  kUInt16 = 512,
  kUInt32 = 768,
};

template <typename T>
T byteswap_value(T v) {
  auto* bytes = reinterpret_cast<unsigned char*>(&v);
  for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
  return v;
}

class HeaderView {
 public:
  HeaderView(const unsigned char* bytes, bool swap) : bytes_(bytes), swap_(swap) {}

  template <typename T>
  T get(int offset) const {
    T v;
    std::memcpy(&v, bytes_ + offset, sizeof(T));
    return swap_ ? byteswap_value(v) : v;
  }

 private:
  const unsigned char* bytes_;
  bool swap_;
};

class HeaderWriter {
 public:
  HeaderWriter() : bytes_(kNiftiDataOffset, '\0') {}

  template <typename T>
  void put(int offset, T v) {
    if constexpr (std::endian::native == std::endian::big) v = byteswap_value(v);
    std::memcpy(bytes_.data() + offset, &v, sizeof(T));
  }
  void put_text(int offset, std::string_view text) { std::memcpy(bytes_.data() + offset, text.data(), text.size()); }

  std::string& bytes() { return bytes_; }

 private:
  std::string bytes_;
};

// Reads the whole (possibly gzip-compressed) file; gzread passes plain files through.
std::string read_maybe_gzipped(const fs::path& path) {
  gzFile file = gzopen(path.string().c_str(), "rb");
  if (file == nullptr) throw Error("cannot open '" + path.string() + "'");
  std::string out;
  std::vector<char> chunk(1 << 20);
  while (true) {
    const int n = gzread(file, chunk.data(), static_cast<unsigned>(chunk.size()));
    if (n < 0) {
      gzclose(file);
      throw FormatError("corrupt volume '" + path.string() + "': decompression failed");
    }
    if (n == 0) break;
    out.append(chunk.data(), static_cast<std::size_t>(n));
  }
  gzclose(file);
  return out;
}

void write_maybe_gzipped(const fs::path& path, std::string_view bytes) {
  if (!has_suffix(path, ".gz")) {
    write_file_atomic(path, bytes);
    return;
  }
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  gzFile file = gzopen(tmp.string().c_str(), "wb6");
  if (file == nullptr) throw Error("cannot write '" + tmp.string() + "'");
  std::size_t done = 0;
  while (done < bytes.size()) {
    const auto n = static_cast<unsigned>(std::min<std::size_t>(bytes.size() - done, 1u << 30));
    if (gzwrite(file, bytes.data() + done, n) != static_cast<int>(n)) {
      gzclose(file);
      throw Error("short write to '" + tmp.string() + "'");
    }
    done += n;
  }
  if (gzclose(file) != Z_OK) throw Error("cannot finish '" + tmp.string() + "'");
  fs::rename(tmp, path);
}

template <typename T>
void convert_samples(const unsigned char* src, std::size_t n, bool swap, std::vector<float>& out) {
  out.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    T v;
    std::memcpy(&v, src + i * sizeof(T), sizeof(T));
    if (swap) v = byteswap_value(v);
    out[i] = static_cast<float>(v);
  }
}

Volume finish_kind(Geometry geometry, std::vector<float> values, VolumeKind kind) {
  if (kind == VolumeKind::label) {
    for (float& v : values) v = v >= 0.5f ? 1.0f : 0.0f;
  }
  return Volume(geometry, std::move(values), kind);
}

Volume load_raw(const fs::path& path, VolumeKind requested) {
  const fs::path sidecar = raw_sidecar_path(path);
  const fs::path data_path = raw_data_path(path);
  json meta;
  try {
    meta = json::parse(read_file(sidecar));
  } catch (const json::exception& e) {
    throw FormatError("corrupt volume sidecar '" + sidecar.string() + "': " + e.what());
  }
  Geometry geometry;
  try {
    const auto shape = meta.at("shape").get<std::vector<int>>();
    const auto spacing = meta.at("spacing").get<std::vector<double>>();
    if (shape.size() != 3 || spacing.size() != 3) throw FormatError("shape and spacing need 3 entries");
    geometry.extent = {shape[0], shape[1], shape[2]};
    geometry.spacing = {spacing[0], spacing[1], spacing[2]};
    if (meta.contains("origin")) {
      const auto origin = meta.at("origin").get<std::vector<double>>();
      if (origin.size() != 3) throw FormatError("origin needs 3 entries");
      geometry.origin = {origin[0], origin[1], origin[2]};
    }
    if (meta.value("dtype", std::string("float32")) != "float32") throw FormatError("only float32 raw data is supported");
  } catch (const json::exception& e) {
    throw FormatError("corrupt volume sidecar '" + sidecar.string() + "': " + e.what());
  }
  if (geometry.extent.x < 1 || geometry.extent.y < 1 || geometry.extent.z < 1) {
    throw FormatError("corrupt volume '" + path.string() + "': non-positive shape");
  }
  VolumeKind kind = requested;
  if (meta.contains("kind") && requested == VolumeKind::intensity) {
    kind = parse_volume_kind(meta.at("kind").get<std::string>());
  }

  const std::string bytes = read_file(data_path);
  const std::size_t expected = geometry.extent.count() * sizeof(float);
  if (bytes.size() != expected) {
    throw FormatError("corrupt volume '" + data_path.string() + "': " + std::to_string(bytes.size()) +
                      " bytes, shape " + to_string(geometry.extent) + " needs " + std::to_string(expected));
  }
  std::vector<float> values(geometry.extent.count());
  std::memcpy(values.data(), bytes.data(), expected);
  if constexpr (std::endian::native == std::endian::big) {
    for (float& v : values) v = byteswap_value(v);
  }
  for (double s : geometry.spacing) {
    if (!(s > 0.0)) throw FormatError("corrupt volume sidecar '" + sidecar.string() + "': spacing must be positive");
  }
  return finish_kind(geometry, std::move(values), kind);
}

void save_raw(const Volume& volume, const fs::path& path) {
  const Geometry& g = volume.geometry();
  json meta = {
      {"shape", {g.extent.x, g.extent.y, g.extent.z}},
      {"spacing", {g.spacing[0], g.spacing[1], g.spacing[2]}},
      {"origin", {g.origin[0], g.origin[1], g.origin[2]}},
      {"kind", std::string(to_string(volume.kind()))},
      {"dtype", "float32"},
      {"endian", "little"},
  };
  std::string bytes(volume.size() * sizeof(float), '\0');
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i < volume.size(); ++i) {
      const float v = byteswap_value(volume[i]);
      std::memcpy(bytes.data() + i * sizeof(float), &v, sizeof(float));
    }
  } else {
    std::memcpy(bytes.data(), volume.values().data(), bytes.size());
  }
  write_file_atomic(raw_data_path(path), bytes);
  write_file_atomic(raw_sidecar_path(path), meta.dump(2) + "\n");
}

void save_nifti(const Volume& volume, const fs::path& path) {
  const Geometry& g = volume.geometry();
  const bool as_label = volume.kind() == VolumeKind::label;
  HeaderWriter h;
  h.put<int>(0, kNiftiHeaderSize);
  h.put<short>(40, 3);
  h.put<short>(42, static_cast<short>(g.extent.x));
  h.put<short>(44, static_cast<short>(g.extent.y));
  h.put<short>(46, static_cast<short>(g.extent.z));
  for (int i = 4; i < 8; ++i) h.put<short>(40 + 2 * i, 1);
  h.put<short>(70, as_label ? kUInt8 : kFloat32);
  h.put<short>(72, as_label ? 8 : 32);
  h.put<float>(76, 1.0f);
  for (int i = 0; i < 3; ++i) h.put<float>(80 + 4 * i, static_cast<float>(g.spacing[i]));
  h.put<float>(108, static_cast<float>(kNiftiDataOffset));
  h.put<float>(112, 1.0f);
  h.put<float>(116, 0.0f);
  h.put<char>(123, 2);  // NIFTI_UNITS_MM
  h.put_text(148, "auxseg");
  h.put<short>(252, 1);
  h.put<short>(254, 1);
  for (int i = 0; i < 3; ++i) h.put<float>(268 + 4 * i, static_cast<float>(g.origin[i]));
  for (int row = 0; row < 3; ++row) {
    for (int col = 0; col < 3; ++col) {
      h.put<float>(280 + 16 * row + 4 * col, row == col ? static_cast<float>(g.spacing[row]) : 0.0f);
    }
    h.put<float>(280 + 16 * row + 12, static_cast<float>(g.origin[row]));
  }
  h.put_text(344, std::string_view("n+1\0", 4));

  std::string bytes = std::move(h.bytes());
  const std::size_t n = volume.size();
  if (as_label) {
    bytes.resize(kNiftiDataOffset + n);
    for (std::size_t i = 0; i < n; ++i) bytes[kNiftiDataOffset + i] = static_cast<char>(volume[i] != 0.0f ? 1 : 0);
  } else {
    bytes.resize(kNiftiDataOffset + n * sizeof(float));
    for (std::size_t i = 0; i < n; ++i) {
      float v = volume[i];
      if constexpr (std::endian::native == std::endian::big) v = byteswap_value(v);
      std::memcpy(bytes.data() + kNiftiDataOffset + i * sizeof(float), &v, sizeof(float));
    }
  }
  write_maybe_gzipped(path, bytes);
}

}  // namespace

fs::path raw_sidecar_path(const fs::path& path) {
  fs::path out = path;
  out.replace_extension(".json");
  return out;
}

fs::path raw_data_path(const fs::path& path) {
  fs::path out = path;
  out.replace_extension(".raw");
  return out;
}

VolumeFormat detect_format(const fs::path& path) {
  if (has_suffix(path, ".nii") || has_suffix(path, ".nii.gz")) return VolumeFormat::nifti;
  if (has_suffix(path, ".raw") || has_suffix(path, ".json")) return VolumeFormat::raw_json;
  throw FormatError("cannot infer volume format from '" + path.string() + "'");
}

NiftiImage read_nifti(const fs::path& path) {
  const std::string file = read_maybe_gzipped(path);
  if (file.size() < static_cast<std::size_t>(kNiftiHeaderSize)) {
    throw FormatError("corrupt volume '" + path.string() + "': truncated header");
  }
  const auto* raw = reinterpret_cast<const unsigned char*>(file.data());
  int sizeof_hdr;
  std::memcpy(&sizeof_hdr, raw, sizeof(int));
  bool swap = false;
  if (sizeof_hdr != kNiftiHeaderSize) {
    if (byteswap_value(sizeof_hdr) != kNiftiHeaderSize) {
      throw FormatError("corrupt volume '" + path.string() + "': not a NIfTI-1 header");
    }
    swap = true;
  }
  const HeaderView h(raw, swap);
  const short ndim = h.get<short>(40);
  if (ndim < 1 || ndim > 7) throw FormatError("corrupt volume '" + path.string() + "': bad dim[0]");
  int dims[7] = {1, 1, 1, 1, 1, 1, 1};
  for (int i = 0; i < ndim; ++i) {
    dims[i] = h.get<short>(42 + 2 * i);
    if (dims[i] < 1) throw FormatError("corrupt volume '" + path.string() + "': non-positive dimension");
  }
  for (int i = 4; i < 7; ++i) {
    if (dims[i] != 1) throw FormatError("unsupported NIfTI '" + path.string() + "': more than 4 dimensions");
  }

  NiftiImage image;
  image.geometry.extent = {dims[0], dims[1], dims[2]};
  image.channels = dims[3];
  for (int i = 0; i < 3; ++i) {
    const float p = h.get<float>(80 + 4 * i);
    image.geometry.spacing[i] = (p > 0.0f && std::isfinite(p)) ? static_cast<double>(p) : 1.0;
  }
  if (h.get<short>(254) > 0) {
    for (int i = 0; i < 3; ++i) image.geometry.origin[i] = h.get<float>(280 + 16 * i + 12);
  } else if (h.get<short>(252) > 0) {
    for (int i = 0; i < 3; ++i) image.geometry.origin[i] = h.get<float>(268 + 4 * i);
  }

  const short datatype = h.get<short>(70);
  const auto vox_offset = static_cast<std::size_t>(h.get<float>(108));
  const std::size_t n = image.geometry.extent.count() * static_cast<std::size_t>(image.channels);
  std::size_t width = 0;
  switch (datatype) {
    case kUInt8: case kInt8: width = 1; break;
    case kInt16: case kUInt16: width = 2; break;
    case kInt32: case kUInt32: case kFloat32: width = 4; break;
    case kFloat64: width = 8; break;
    default: throw FormatError("unsupported NIfTI datatype " + std::to_string(datatype) + " in '" + path.string() + "'");
  }
  const std::size_t offset = std::max<std::size_t>(vox_offset, kNiftiDataOffset);
  if (file.size() < offset + n * width) {
    throw FormatError("corrupt volume '" + path.string() + "': expected " + std::to_string(n * width) +
                      " data bytes, file is truncated");
  }
  const auto* src = raw + offset;
  switch (datatype) {
    case kUInt8: convert_samples<std::uint8_t>(src, n, swap, image.values); break;
    case kInt8: convert_samples<std::int8_t>(src, n, swap, image.values); break;
    case kInt16: convert_samples<std::int16_t>(src, n, swap, image.values); break;
    case kUInt16: convert_samples<std::uint16_t>(src, n, swap, image.values); break;
    case kInt32: convert_samples<std::int32_t>(src, n, swap, image.values); break;
    case kUInt32: convert_samples<std::uint32_t>(src, n, swap, image.values); break;
    case kFloat32: convert_samples<float>(src, n, swap, image.values); break;
    case kFloat64: convert_samples<double>(src, n, swap, image.values); break;
    default: break;
  }
  const float slope = h.get<float>(112);
  const float inter = h.get<float>(116);
  if (slope != 0.0f && std::isfinite(slope) && (slope != 1.0f || inter != 0.0f)) {
    for (float& v : image.values) v = v * slope + inter;
  }
  return image;
}

Volume load_nifti_channel(const fs::path& path, int channel, VolumeKind kind) {
  NiftiImage image = read_nifti(path);
  if (channel < 0 || channel >= image.channels) {
    throw ArgumentError("channel " + std::to_string(channel) + " out of range for '" + path.string() + "' with " +
                        std::to_string(image.channels) + " channels");
  }
  const std::size_t n = image.geometry.extent.count();
  std::vector<float> values(image.values.begin() + static_cast<std::ptrdiff_t>(n * channel),
                            image.values.begin() + static_cast<std::ptrdiff_t>(n * (channel + 1)));
  return finish_kind(image.geometry, std::move(values), kind);
}

Volume load_volume(const fs::path& path, VolumeKind kind, std::optional<VolumeFormat> format) {
  const VolumeFormat fmt = format.value_or(detect_format(path));
  if (fmt == VolumeFormat::raw_json) return load_raw(path, kind);
  NiftiImage image = read_nifti(path);
  if (image.channels != 1) {
    throw FormatError("'" + path.string() + "' has " + std::to_string(image.channels) +
                      " channels; use load_nifti_channel");
  }
  return finish_kind(image.geometry, std::move(image.values), kind);
}

void save_volume(const Volume& volume, const fs::path& path, std::optional<VolumeFormat> format) {
  const VolumeFormat fmt = format.value_or(detect_format(path));
  if (fmt == VolumeFormat::raw_json) {
    save_raw(volume, path);
  } else {
    if (volume.extent().x > 32767 || volume.extent().y > 32767 || volume.extent().z > 32767) {
      throw ArgumentError("extent too large for NIfTI-1");
    }
    save_nifti(volume, path);
  }
}

}  // namespace auxseg
