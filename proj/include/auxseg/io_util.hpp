#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace auxseg {

/// Whole file as bytes; throws Error when unreadable.
std::string read_file(const std::filesystem::path& path);

/// Writes to "<path>.tmp" then renames over path, creating parent directories.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

/// Lower-cased file name ends with suffix (e.g. ".nii.gz").
bool has_suffix(const std::filesystem::path& path, std::string_view suffix);

}  // namespace auxseg
