#include "auxseg/version.hpp"

namespace auxseg {

std::string_view library_version() { return AUXSEG_VERSION; }
std::string_view code_version() { return AUXSEG_GIT_VERSION; }

}  // namespace auxseg
