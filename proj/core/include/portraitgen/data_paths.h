#pragma once

#include <filesystem>

namespace portraitgen {

/// Directory holding shipped data files (denylist, builtin styles, hub URIs).
/// PORTRAITGEN_DATA_DIR overrides the compiled-in location.
std::filesystem::path data_dir();

}  // namespace portraitgen
