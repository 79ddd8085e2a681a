#include "portraitgen/digest.h"

#include <cstdio>

namespace portraitgen {

std::string to_hex(std::uint64_t value) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(value));
    return buf;
}

std::string Digest::hex() const { return to_hex(state_); }

std::uint64_t hash_text(std::string_view text) { return Digest().update(text).value(); }

}  // namespace portraitgen
