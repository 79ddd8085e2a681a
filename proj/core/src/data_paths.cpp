#include "portraitgen/data_paths.h"

#include <cstdlib>

#ifndef PORTRAITGEN_DEFAULT_DATA_DIR
#define PORTRAITGEN_DEFAULT_DATA_DIR "data"
#endif

namespace portraitgen {

std::filesystem::path data_dir() {
    if (const char* env = std::getenv("PORTRAITGEN_DATA_DIR"); env != nullptr && *env != '\0') {
        return env;
    }
    return PORTRAITGEN_DEFAULT_DATA_DIR;
}

}  // namespace portraitgen
