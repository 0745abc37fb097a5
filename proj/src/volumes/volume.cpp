#include "auxseg/volumes/volume.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace auxseg {

std::string to_string(const Extent3& e) {
  std::ostringstream out;
  out << e.x << "x" << e.y << "x" << e.z;
  return out.str();
}

std::string_view to_string(VolumeKind kind) {
  switch (kind) {
    case VolumeKind::intensity: return "intensity";
    case VolumeKind::label: return "label";
    case VolumeKind::probability: return "probability";
  }
  return "intensity";
}

VolumeKind parse_volume_kind(std::string_view text) {
  if (text == "intensity") return VolumeKind::intensity;
  if (text == "label") return VolumeKind::label;
  if (text == "probability") return VolumeKind::probability;
  throw FormatError("unknown volume kind '" + std::string(text) + "'");
}

std::string_view to_string(SampleRole role) {
  switch (role) {
    case SampleRole::triplet: return "triplet";
    case SampleRole::pair: return "pair";
    case SampleRole::test: return "test";
  }
  return "test";
}

SampleRole parse_sample_role(std::string_view text) {
  if (text == "triplet") return SampleRole::triplet;
  if (text == "pair") return SampleRole::pair;
  if (text == "test") return SampleRole::test;
  throw FormatError("unknown sample role '" + std::string(text) + "'");
}

bool same_grid(const Geometry& a, const Geometry& b) {
  if (!(a.extent == b.extent)) return false;
  for (int i = 0; i < 3; ++i) {
    const double scale = std::max(std::abs(a.spacing[i]), std::abs(b.spacing[i]));
    if (std::abs(a.spacing[i] - b.spacing[i]) > 1e-5 * scale) return false;
  }
  return true;
}

Volume::Volume(Geometry geometry, std::vector<float> values, VolumeKind kind)
    : geometry_(geometry), values_(std::move(values)), kind_(kind) {
  const Extent3& e = geometry_.extent;
  if (e.x < 1 || e.y < 1 || e.z < 1) {
    throw ArgumentError("volume extent must be positive, got " + to_string(e));
  }
  for (double s : geometry_.spacing) {
    if (!(s > 0.0) || !std::isfinite(s)) throw ArgumentError("volume spacing must be positive");
  }
  if (values_.size() != e.count()) {
    throw ArgumentError("volume has " + std::to_string(values_.size()) + " values for extent " + to_string(e));
  }
  if (kind_ == VolumeKind::label) {
    for (float v : values_) {
      if (v != 0.0f && v != 1.0f) throw ArgumentError("label volume values must be 0 or 1");
    }
  } else if (kind_ == VolumeKind::probability) {
    for (float v : values_) {
      if (!(v >= 0.0f && v <= 1.0f)) throw ArgumentError("probability volume values must lie in [0, 1]");
    }
  }
}

Volume Volume::zeros(const Geometry& geometry, VolumeKind kind) {
  return Volume(geometry, std::vector<float>(geometry.extent.count(), 0.0f), kind);
}

Volume Volume::with_values(std::vector<float> values) const { return with_values(std::move(values), kind_); }

Volume Volume::with_values(std::vector<float> values, VolumeKind kind) const {
  return Volume(geometry_, std::move(values), kind);
}

std::size_t Volume::count_nonzero() const {
  return static_cast<std::size_t>(std::count_if(values_.begin(), values_.end(), [](float v) { return v != 0.0f; }));
}

Volume binarize(const Volume& v, float threshold) {
  std::vector<float> out(v.size());
  const auto in = v.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = in[i] >= threshold ? 1.0f : 0.0f;
  return v.with_values(std::move(out), VolumeKind::label);
}

void Sample::validate() const {
  auto check = [&](const std::optional<Volume>& v, const char* what) {
    if (v && !same_grid(v->geometry(), source.geometry())) {
      throw ArgumentError("sample '" + id + "': " + what + " grid " + to_string(v->extent()) +
                          " does not match source grid " + to_string(source.extent()));
    }
  };
  check(auxiliary, "auxiliary");
  check(label, "label");
  check(liver_mask, "liver mask");
}

}  // namespace auxseg
