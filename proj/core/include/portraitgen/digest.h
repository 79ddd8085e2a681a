#pragma once

#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>

namespace portraitgen {

/// Incremental 64-bit FNV-1a. Stable across platforms and runs.
class Digest {
public:
    Digest& update(std::span<const std::uint8_t> bytes) {
        for (auto b : bytes) {
            state_ ^= b;
            state_ *= kPrime;
        }
        return *this;
    }
    Digest& update(std::string_view text) {
        update(std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
        // Length-terminate so ("ab","c") and ("a","bc") differ.
        return update_value(static_cast<std::uint64_t>(text.size()));
    }
    template <class T>
        requires std::is_arithmetic_v<T>
    Digest& update_value(T value) {
        std::uint8_t raw[sizeof(T)];
        std::memcpy(raw, &value, sizeof(T));
        return update(std::span<const std::uint8_t>(raw, sizeof(T)));
    }

    std::uint64_t value() const { return state_; }
    std::string hex() const;

private:
    static constexpr std::uint64_t kOffset = 14695981039346656037ull;
    static constexpr std::uint64_t kPrime = 1099511628211ull;
    std::uint64_t state_ = kOffset;
};

std::string to_hex(std::uint64_t value);
std::uint64_t hash_text(std::string_view text);

/// SplitMix64 step; used to derive per-pixel noise from a seed without
/// relying on implementation-defined <random> distributions.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

/// Maps a 64-bit value to [0, 1).
inline double unit_interval(std::uint64_t x) {
    return static_cast<double>(x >> 11) * (1.0 / 9007199254740992.0);
}

}  // namespace portraitgen
