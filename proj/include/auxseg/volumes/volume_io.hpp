#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "auxseg/volumes/volume.hpp"

namespace auxseg {

/// On-disk volume formats.
///  - nifti:    NIfTI-1 single file (.nii or .nii.gz)
///  - raw_json: little-endian float32 array (.raw) plus a JSON sidecar
///              (.json) holding shape, spacing, origin and kind.
enum class VolumeFormat { nifti, raw_json };

/// Format from the file name; throws FormatError for unknown extensions.
VolumeFormat detect_format(const std::filesystem::path& path);

/// Reads a volume. Label volumes (requested kind, or kind recorded in a raw
/// sidecar) are binarized at 0.5. Throws FormatError("corrupt volume ...")
/// for truncated or inconsistent files.
Volume load_volume(const std::filesystem::path& path, VolumeKind kind = VolumeKind::intensity,
                   std::optional<VolumeFormat> format = std::nullopt);

/// Writes a volume; the format follows the extension unless given.
/// Parent directories are created. The write goes to a temporary file that is
/// renamed into place.
void save_volume(const Volume& volume, const std::filesystem::path& path,
                 std::optional<VolumeFormat> format = std::nullopt);

/// Multi-channel NIfTI contents (4th dimension = channel), float-converted,
/// scl_slope/scl_inter applied. Channel c occupies
/// values[c * extent.count() ...].
struct NiftiImage {
  Geometry geometry;
  int channels = 1;
  std::vector<float> values;
};

NiftiImage read_nifti(const std::filesystem::path& path);

/// Reads one channel of a (possibly 4D) NIfTI file.
Volume load_nifti_channel(const std::filesystem::path& path, int channel, VolumeKind kind);

/// Raw-format sidecar path for a given .raw/.json path.
std::filesystem::path raw_sidecar_path(const std::filesystem::path& path);
std::filesystem::path raw_data_path(const std::filesystem::path& path);

}  // namespace auxseg
