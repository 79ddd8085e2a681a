#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace portraitgen {

enum class ErrorCode {
    invalid_input,
    degenerate_landmarks,
    constraint_infeasible,
    empty_training_set,
    no_face,
    fixture_missing,
    conflict,
    resolution,
    incompatible,
    invalid_config,
    overlap,
    stage1_failure,
    out_of_range,
    not_found,
    audio_decode,
    backend_unavailable,
    io,
    internal,
};

// Stable machine-readable name ("empty-training-set", "no-face", ...).
std::string_view error_code_name(ErrorCode code);
/// Inverse of error_code_name; unknown names map to internal.
ErrorCode parse_error_code(std::string_view name);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
          code_(code),
          detail_(message) {}

    ErrorCode code() const noexcept { return code_; }
    std::string_view cause() const noexcept { return error_code_name(code_); }
    const std::string& detail() const noexcept { return detail_; }

private:
    ErrorCode code_;
    std::string detail_;
};

}  // namespace portraitgen
