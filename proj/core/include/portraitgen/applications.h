#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "portraitgen/backends.h"
#include "portraitgen/clock.h"
#include "portraitgen/generation.h"
#include "portraitgen/inpaint.h"

namespace portraitgen::apps {

inline constexpr double kTryOnStrength = 1.0;
inline constexpr std::array<int, 2> kTalkingHeadResolutions{256, 512};
inline constexpr int kPoseEmbeddingCount = 46;
inline constexpr int kUpscaleFactor = 2;

struct TryOnRequest {
    Image garment_template;
    Mask garment_mask;  // pixels that must survive unchanged
    const generation::IdentityProfile* identity = nullptr;
    std::string prompt;
    std::uint64_t seed = 0;
    /// Run the identity inpainting pipeline on the result (needs an identity).
    bool refine = false;
};

struct TryOnResult {
    Image image;
    std::string control_digest;
    std::vector<std::string> control_kinds;
    nlohmann::json manifest;
};

/// Union of discs around the hand keypoints.
Mask hand_region(const PoseMap& pose, int radius);

/// Inpaints everything outside the garment mask at strength 1.0 with bone+hand
/// pose, depth on the hands (only when the pose has hand points) and canny edges
/// of the body area.
TryOnResult virtual_tryon(const TryOnRequest& request, const lora::ModelWeights& base,
                          const backends::BackendRegistry& registry, const Clock& clock = system_clock());

struct AudioSource {
    enum class Kind { tts, file, recording };
    Kind kind = Kind::tts;
    std::string text;
    std::string voice = "default";
    std::filesystem::path path;
    std::vector<std::uint8_t> bytes;
};

std::string_view to_string(AudioSource::Kind kind);

struct TalkingHeadRequest {
    Image portrait;
    AudioSource audio;
    int resolution = 256;
    int pose_index = 0;
    double expression_scale = 1.0;
    double blink_rate = 1.0;
    bool upscale = false;

    /// invalid-input for an unsupported resolution or bad scales; out-of-range for the pose index.
    void validate() const;
};

/// invalid-input for an unsupported resolution or bad scales; out-of-range for the pose index.
void validate_talking_head_options(int resolution, int pose_index, double expression_scale, double blink_rate);

struct TalkingHeadResult {
    backends::VideoClip clip;
    backends::Audio audio;
    nlohmann::json manifest;
};

/// 16-bit PCM RIFF/WAVE; stereo is averaged to mono. Throws audio-decode.
backends::Audio decode_wav(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_wav(const backends::Audio& audio);

backends::Audio resolve_audio(const AudioSource& source, const backends::BackendRegistry& registry);

/// Audio -> driver -> optional upscaler. The manifest records dimensions, fps and
/// a duration equal to the audio's.
TalkingHeadResult make_talking_head(const TalkingHeadRequest& request, const backends::BackendRegistry& registry,
                                    const Clock& clock = system_clock());

}  // namespace portraitgen::apps
