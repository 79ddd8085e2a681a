#include "portraitgen/error.h"

namespace portraitgen {

std::string_view error_code_name(ErrorCode code) {
    switch (code) {
        case ErrorCode::invalid_input: return "invalid-input";
        case ErrorCode::degenerate_landmarks: return "degenerate-landmarks";
        case ErrorCode::constraint_infeasible: return "constraint-infeasible";
        case ErrorCode::empty_training_set: return "empty-training-set";
        case ErrorCode::no_face: return "no-face";
        case ErrorCode::fixture_missing: return "fixture-missing";
        case ErrorCode::conflict: return "conflict";
        case ErrorCode::resolution: return "resolution";
        case ErrorCode::incompatible: return "incompatible";
        case ErrorCode::invalid_config: return "invalid-config";
        case ErrorCode::overlap: return "overlap";
        case ErrorCode::stage1_failure: return "stage1-failure";
        case ErrorCode::out_of_range: return "out-of-range";
        case ErrorCode::not_found: return "not-found";
        case ErrorCode::audio_decode: return "audio-decode";
        case ErrorCode::backend_unavailable: return "backend-unavailable";
        case ErrorCode::io: return "io";
        case ErrorCode::internal: return "internal";
    }
    return "internal";
}

ErrorCode parse_error_code(std::string_view name) {
    for (int i = 0; i <= static_cast<int>(ErrorCode::internal); ++i) {
        const auto code = static_cast<ErrorCode>(i);
        if (error_code_name(code) == name) {
            return code;
        }
    }
    return ErrorCode::internal;
}

}  // namespace portraitgen
