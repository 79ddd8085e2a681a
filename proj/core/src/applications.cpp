#include "portraitgen/applications.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "portraitgen/error.h"

namespace portraitgen::apps {

using backends::BackendRegistry;
using backends::BackendRole;

namespace {

nlohmann::json timing(TimePoint started, TimePoint finished) {
    return {{"started", iso8601(started)},
            {"finished", iso8601(finished)},
            {"elapsed_ms", std::chrono::duration_cast<std::chrono::milliseconds>(finished - started).count()}};
}

}  // namespace

Mask hand_region(const PoseMap& pose, int radius) {
    Mask points = make_mask(pose.width, pose.height);
    for (const auto& p : pose.hand_points) {
        const int x = static_cast<int>(std::lround(p.x));
        const int y = static_cast<int>(std::lround(p.y));
        if (x >= 0 && y >= 0 && x < pose.width && y < pose.height) {
            points.at(x, y) = 255;
        }
    }
    return inpaint::expand_face_mask(points, radius);
}

TryOnResult virtual_tryon(const TryOnRequest& request, const lora::ModelWeights& base,
                          const BackendRegistry& registry, const Clock& clock) {
    const Image& image = request.garment_template;
    require_valid(image, "garment template");
    require_mask_for(request.garment_mask, image);
    if (mask_count(request.garment_mask) == 0) {
        throw Error(ErrorCode::invalid_input, "garment mask is empty");
    }
    const Mask inpaint_mask = mask_complement(request.garment_mask);
    if (mask_count(inpaint_mask) == 0) {
        throw Error(ErrorCode::invalid_input, "garment mask covers the whole template");
    }
    if (request.refine && request.identity == nullptr) {
        throw Error(ErrorCode::invalid_input, "refinement needs an identity");
    }
    const auto started = clock();
    const auto pose_estimator = registry.get<backends::PoseEstimator>();
    const auto depth_estimator = registry.get<backends::DepthEstimator>();
    const auto parser = registry.get<backends::HumanParser>();
    const auto inpainter = registry.get<backends::Inpainter>();

    ControlStack controls;
    controls.pose = pose_estimator->estimate(image, PoseKind::bone_and_hand);
    if (controls.pose->has_hands()) {
        const int radius = std::max(4, static_cast<int>(std::lround(0.03 * std::min(image.width, image.height))));
        Mask hands = hand_region(*controls.pose, radius);
        Image depth = depth_estimator->estimate(image, hands);
        controls.depth = DepthControl{std::move(hands), std::move(depth)};
    }
    const Mask body = parser->body_mask(image);
    controls.canny = EdgeControl{body, edge_map(image, &body)};
    controls.strength = kTryOnStrength;
    controls.validate();

    lora::ModelWeights weights = base;
    std::string prompt = request.prompt;
    if (request.identity != nullptr) {
        const auto& adapter = request.identity->adapter;
        weights = lora::merge_adapters(base, {{{adapter->id, lora::kDefaultFaceWeight}}}, {{adapter->id, adapter}});
        prompt = generation::assemble_prompt(request.identity->trigger, "", request.prompt);
    }

    TryOnResult result;
    result.control_digest = controls.digest();
    result.control_kinds = controls.kinds();
    result.image = inpainter->inpaint(weights, image, inpaint_mask, {prompt, "", request.seed, 0, 0}, controls);
    nlohmann::json refinement = nullptr;
    if (request.refine) {
        inpaint::InpaintOptions options;
        options.seed = request.seed;
        options.protect = request.garment_mask;
        auto refined = inpaint::inpaint_portrait(result.image, *request.identity, base, registry, options, clock);
        result.image = std::move(refined.image);
        refinement = std::move(refined.manifest);
    }

    static constexpr BackendRole kRoles[] = {BackendRole::pose_estimator, BackendRole::depth_estimator,
                                             BackendRole::human_parser, BackendRole::inpainter};
    result.manifest = {{"kind", "tryon"},
                       {"strength", controls.strength},
                       {"controls", result.control_kinds},
                       {"control_digest", result.control_digest},
                       {"identity", request.identity ? nlohmann::json(request.identity->id) : nlohmann::json(nullptr)},
                       {"prompt", prompt},
                       {"seed", request.seed},
                       {"refinement", refinement},
                       {"backends", generation::backend_ids(registry, kRoles)},
                       {"output_digest", image_digest(result.image)},
                       {"timing", timing(started, clock())}};
    return result;
}

std::string_view to_string(AudioSource::Kind kind) {
    switch (kind) {
        case AudioSource::Kind::tts: return "tts";
        case AudioSource::Kind::file: return "file";
        case AudioSource::Kind::recording: return "recording";
    }
    return "tts";
}

void validate_talking_head_options(int resolution, int pose_index, double expression_scale, double blink_rate) {
    if (std::find(kTalkingHeadResolutions.begin(), kTalkingHeadResolutions.end(), resolution) ==
        kTalkingHeadResolutions.end()) {
        throw Error(ErrorCode::invalid_input, "unsupported resolution " + std::to_string(resolution) +
                                                  "; expected 256 or 512");
    }
    if (pose_index < 0 || pose_index >= kPoseEmbeddingCount) {
        throw Error(ErrorCode::out_of_range, "pose embedding index " + std::to_string(pose_index) +
                                                 " outside [0, " + std::to_string(kPoseEmbeddingCount - 1) + "]");
    }
    if (!std::isfinite(expression_scale) || expression_scale < 0.0) {
        throw Error(ErrorCode::invalid_input, "expression scale must be finite and non-negative");
    }
    if (!std::isfinite(blink_rate) || blink_rate < 0.0) {
        throw Error(ErrorCode::invalid_input, "blink rate must be finite and non-negative");
    }
}

void TalkingHeadRequest::validate() const {
    require_valid(portrait, "portrait");
    validate_talking_head_options(resolution, pose_index, expression_scale, blink_rate);
}

namespace {

std::uint32_t read_u32(std::span<const std::uint8_t> b, std::size_t at) {
    return static_cast<std::uint32_t>(b[at]) | (static_cast<std::uint32_t>(b[at + 1]) << 8) |
           (static_cast<std::uint32_t>(b[at + 2]) << 16) | (static_cast<std::uint32_t>(b[at + 3]) << 24);
}

std::uint16_t read_u16(std::span<const std::uint8_t> b, std::size_t at) {
    return static_cast<std::uint16_t>(b[at] | (b[at + 1] << 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}

}  // namespace

backends::Audio decode_wav(std::span<const std::uint8_t> bytes) {
    auto fail = [](const std::string& why) { return Error(ErrorCode::audio_decode, why); };
    if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 || std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
        throw fail("not a RIFF/WAVE file");
    }
    int channels = 0;
    int sample_rate = 0;
    int bits = 0;
    bool have_format = false;
    std::size_t at = 12;
    while (at + 8 <= bytes.size()) {
        const std::uint32_t size = read_u32(bytes, at + 4);
        const std::size_t body = at + 8;
        if (size > bytes.size() - body) {
            throw fail("truncated chunk");
        }
        if (std::memcmp(bytes.data() + at, "fmt ", 4) == 0) {
            if (size < 16) throw fail("short fmt chunk");
            const auto format = read_u16(bytes, body);
            channels = read_u16(bytes, body + 2);
            sample_rate = static_cast<int>(read_u32(bytes, body + 4));
            bits = read_u16(bytes, body + 14);
            if (format != 1 || bits != 16) throw fail("only 16-bit PCM is supported");
            if (channels < 1 || sample_rate <= 0) throw fail("bad channel count or sample rate");
            have_format = true;
        } else if (std::memcmp(bytes.data() + at, "data", 4) == 0) {
            if (!have_format) throw fail("data chunk before fmt chunk");
            backends::Audio audio;
            audio.sample_rate = sample_rate;
            const std::size_t frame = static_cast<std::size_t>(channels) * 2;
            const std::size_t frames = size / frame;
            audio.samples.reserve(frames);
            for (std::size_t f = 0; f < frames; ++f) {
                long sum = 0;
                for (int c = 0; c < channels; ++c) {
                    sum += static_cast<std::int16_t>(read_u16(bytes, body + f * frame + static_cast<std::size_t>(c) * 2));
                }
                audio.samples.push_back(static_cast<std::int16_t>(sum / channels));
            }
            return audio;
        }
        at = body + size + (size & 1);
    }
    throw fail("no data chunk");
}

std::vector<std::uint8_t> encode_wav(const backends::Audio& audio) {
    const auto data_size = static_cast<std::uint32_t>(audio.samples.size() * 2);
    std::vector<std::uint8_t> out;
    out.reserve(44 + data_size);
    out.insert(out.end(), {'R', 'I', 'F', 'F'});
    put_u32(out, 36 + data_size);
    out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
    put_u32(out, 16);
    put_u16(out, 1);
    put_u16(out, 1);
    put_u32(out, static_cast<std::uint32_t>(audio.sample_rate));
    put_u32(out, static_cast<std::uint32_t>(audio.sample_rate) * 2);
    put_u16(out, 2);
    put_u16(out, 16);
    out.insert(out.end(), {'d', 'a', 't', 'a'});
    put_u32(out, data_size);
    for (auto s : audio.samples) put_u16(out, static_cast<std::uint16_t>(s));
    return out;
}

backends::Audio resolve_audio(const AudioSource& source, const BackendRegistry& registry) {
    switch (source.kind) {
        case AudioSource::Kind::tts:
            if (source.text.empty()) {
                throw Error(ErrorCode::invalid_input, "text-to-speech needs text");
            }
            return registry.get<backends::Tts>()->synthesize(source.text, source.voice);
        case AudioSource::Kind::file: {
            std::ifstream in(source.path, std::ios::binary);
            if (!in) {
                throw Error(ErrorCode::not_found, "audio file not found: " + source.path.string());
            }
            const std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
            return decode_wav(bytes);
        }
        case AudioSource::Kind::recording:
            return decode_wav(source.bytes);
    }
    throw Error(ErrorCode::internal, "unhandled audio source");
}

TalkingHeadResult make_talking_head(const TalkingHeadRequest& request, const BackendRegistry& registry,
                                    const Clock& clock) {
    request.validate();
    const auto started = clock();
    TalkingHeadResult result;
    result.audio = resolve_audio(request.audio, registry);
    if (result.audio.samples.empty()) {
        throw Error(ErrorCode::invalid_input, "audio is empty");
    }
    const auto driver = registry.get<backends::TalkingHeadDriver>();
    result.clip = driver->drive(request.portrait, result.audio,
                                {request.resolution, request.pose_index, request.expression_scale, request.blink_rate});
    if (request.upscale) {
        const auto before = result.clip;
        result.clip = registry.get<backends::Upscaler>()->upscale(before);
        if (result.clip.width != kUpscaleFactor * before.width || result.clip.height != kUpscaleFactor * before.height) {
            throw Error(ErrorCode::internal, "upscaler did not double the video resolution");
        }
    }

    nlohmann::json ids = {{"talking-head-driver", driver->id()}};
    if (request.upscale) ids["upscaler"] = registry.default_id(BackendRole::upscaler).value_or("");
    if (request.audio.kind == AudioSource::Kind::tts) ids["tts"] = registry.default_id(BackendRole::tts).value_or("");
    result.manifest = {{"kind", "talkinghead"},
                       {"width", result.clip.width},
                       {"height", result.clip.height},
                       {"fps", result.clip.fps},
                       {"duration", result.clip.duration},
                       {"frame_count", result.clip.frame_count},
                       {"audio_duration", result.audio.duration()},
                       {"audio_source", to_string(request.audio.kind)},
                       {"resolution", request.resolution},
                       {"pose_index", request.pose_index},
                       {"expression_scale", request.expression_scale},
                       {"blink_rate", request.blink_rate},
                       {"upscale", request.upscale},
                       {"upscale_factor", request.upscale ? kUpscaleFactor : 1},
                       {"backends", ids},
                       {"video_digest", result.clip.digest},
                       {"timing", timing(started, clock())}};
    return result;
}

}  // namespace portraitgen::apps
