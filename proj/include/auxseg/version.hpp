#pragma once

#include <string_view>

namespace auxseg {

/// Library version and `git describe` of the source tree at configure time.
std::string_view library_version();
std::string_view code_version();

}  // namespace auxseg
