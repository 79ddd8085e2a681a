#pragma once

#include <nlohmann/json.hpp>

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "portraitgen/control.h"
#include "portraitgen/error.h"
#include "portraitgen/geometry.h"
#include "portraitgen/image.h"
#include "portraitgen/labeling.h"
#include "portraitgen/lora.h"

namespace portraitgen::backends {

enum class BackendRole {
    rotation_classifier,
    face_detector,
    human_parser,
    skin_retoucher,
    tagger,
    attribute_predictor,
    quality_assessor,
    face_embedder,
    face_fusion,
    text_to_image,
    inpainter,
    pose_estimator,
    depth_estimator,
    autoencoder,
    talking_head_driver,
    upscaler,
    tts,
};

std::span<const BackendRole> all_roles();
std::string_view role_name(BackendRole role);
BackendRole parse_role(std::string_view name);

enum class BackendKind { stub, hub };

struct BackendDescriptor {
    BackendRole role = BackendRole::face_detector;
    std::string id;
    BackendKind kind = BackendKind::stub;
    std::optional<std::string> hub_uri;
    std::map<std::string, std::string> config;
    bool is_default = false;

    void validate() const;

    friend bool operator==(const BackendDescriptor&, const BackendDescriptor&) = default;
};

void to_json(nlohmann::json& j, const BackendDescriptor& d);
void from_json(const nlohmann::json& j, BackendDescriptor& d);

class Backend {
public:
    explicit Backend(BackendDescriptor descriptor) : descriptor_(std::move(descriptor)) {}
    virtual ~Backend() = default;
    Backend(const Backend&) = delete;
    Backend& operator=(const Backend&) = delete;

    const BackendDescriptor& descriptor() const { return descriptor_; }
    const std::string& id() const { return descriptor_.id; }

private:
    BackendDescriptor descriptor_;
};

// ---- Role interfaces ------------------------------------------------------

class RotationClassifier : public Backend {
public:
    static constexpr BackendRole kRole = BackendRole::rotation_classifier;
    using Backend::Backend;
    /// Probabilities that rotating the image by 0, 90, 180, 270 degrees makes it upright.
    virtual std::array<double, 4> predict(const Image& image) const = 0;
};

struct FaceDetection {
    CropRect bbox;
    LandmarkSet5 landmarks;
    std::optional<LandmarkSet68> landmarks68;
    double score = 1.0;
};

class FaceDetector : public Backend {
public:
    static constexpr BackendRole kRole = BackendRole::face_detector;
    using Backend::Backend;
    /// Throws no-face when the image holds no detectable face.
    virtual std::vector<FaceDetection> detect(const Image& image) const = 0;
};

class HumanParser : public Backend {
public:
    static constexpr BackendRole kRole = BackendRole::human_parser;
    using Backend::Backend;
    virtual Mask head_mask(const Image& image, const CropRect& face) const = 0;
    virtual Mask face_mask(const Image& image, const CropRect& face) const = 0;
    virtual Mask body_mask(const Image& image) const = 0;
};

class SkinRetoucher : public Backend {
public:
    static constexpr BackendRole kRole = BackendRole::skin_retoucher;
    using Backend::Backend;
    /// Only pixels inside `region` may change.
    virtual Image retouch(const Image& image, const Mask& region) const = 0;
};

class Tagger : public Backend {
public:
    static constexpr BackendRole kRole = BackendRole::tagger;
    using Backend::Backend;
    virtual std::vector<std::string> tag(const Image& image) const = 0;
};

class AttributePredictor : public Backend {
public:
    static constexpr BackendRole kRole = BackendRole::attribute_predictor;
    using Backend::Backend;
    virtual labeling::AttributePrediction predict(const Image& image) const = 0;
};

class QualityAssessor : public Backend {
public:
    static constexpr BackendRole kRole = BackendRole::quality_assessor;
    using Backend::Backend;
    /// Score in [0, 1]; higher is better.
    virtual double score(const Image& face_crop, const Mask& head_mask) const = 0;
};

class FaceEmbedder : public Backend {
public:
    static constexpr BackendRole kRole = BackendRole::face_embedder;
    using Backend::Backend;
    /// Unit-norm identity embedding.
    virtual std::vector<double> embed(const Image& face) const = 0;
};

class FaceFusion : public Backend {
public:
    static constexpr BackendRole kRole = BackendRole::face_fusion;
    using Backend::Backend;
    /// Refines `target` toward `template_face`; when `region` is given only its pixels change.
    virtual Image fuse(const Image& target, const Image& template_face, const Mask* region) const = 0;
};

struct GenerationParams {
    std::string prompt;
    std::string negative_prompt;
    std::uint64_t seed = 0;
    int width = 0;   // 0 = backend default (or the pose control's canvas)
    int height = 0;
};

class TextToImage : public Backend {
public:
    static constexpr BackendRole kRole = BackendRole::text_to_image;
    using Backend::Backend;
    virtual Image generate(const lora::ModelWeights& weights, const GenerationParams& params,
                           const ControlStack* controls) const = 0;
};

class Inpainter : public Backend {
public:
    static constexpr BackendRole kRole = BackendRole::inpainter;
    using Backend::Backend;
    /// Redraws the masked region of `image` at `controls.strength`.
    virtual Image inpaint(const lora::ModelWeights& weights, const Image& image, const Mask& mask,
                          const GenerationParams& params, const ControlStack& controls) const = 0;
};

class PoseEstimator : public Backend {
public:
    static constexpr BackendRole kRole = BackendRole::pose_estimator;
    using Backend::Backend;
    virtual PoseMap estimate(const Image& image, PoseKind kind) const = 0;
};

class DepthEstimator : public Backend {
public:
    static constexpr BackendRole kRole = BackendRole::depth_estimator;
    using Backend::Backend;
    /// Single-channel depth map with the image's dimensions; zero outside `region`.
    virtual Image estimate(const Image& image, const Mask& region) const = 0;
};

struct Latent {
    Image data;
};

class Autoencoder : public Backend {
public:
    static constexpr BackendRole kRole = BackendRole::autoencoder;
    using Backend::Backend;
    virtual Latent encode(const Image& image) const = 0;
    virtual Image decode(const Latent& latent) const = 0;
};

struct Audio {
    int sample_rate = 16000;
    std::vector<std::int16_t> samples;  // mono PCM

    double duration() const {
        return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
    }
};

struct VideoClip {
    int width = 0;
    int height = 0;
    double fps = 0.0;
    double duration = 0.0;
    std::int64_t frame_count = 0;
    std::string digest;
};

struct TalkingHeadParams {
    int resolution = 256;
    int pose_index = 0;
    double expression_scale = 1.0;
    double blink_rate = 1.0;
};

class TalkingHeadDriver : public Backend {
public:
    static constexpr BackendRole kRole = BackendRole::talking_head_driver;
    using Backend::Backend;
    virtual VideoClip drive(const Image& portrait, const Audio& audio, const TalkingHeadParams& params) const = 0;
};

class Upscaler : public Backend {
public:
    static constexpr BackendRole kRole = BackendRole::upscaler;
    using Backend::Backend;
    virtual VideoClip upscale(const VideoClip& clip) const = 0;
};

class Tts : public Backend {
public:
    static constexpr BackendRole kRole = BackendRole::tts;
    using Backend::Backend;
    virtual Audio synthesize(const std::string& text, const std::string& voice) const = 0;
};

// ---- Registry -------------------------------------------------------------

/// Creates the implementation for a descriptor; returns nullptr for kinds this
/// build cannot instantiate (hub adapters).
using BackendFactory = std::function<std::shared_ptr<Backend>(const BackendDescriptor&)>;

/// Stub implementations for stub descriptors, nullptr for hub descriptors.
std::shared_ptr<Backend> default_backend_factory(const BackendDescriptor& descriptor);

/// Resolves (role, id) to backend implementations. Registration happens during
/// configuration; resolution is safe from concurrent jobs.
class BackendRegistry {
public:
    BackendRegistry();
    explicit BackendRegistry(BackendFactory factory);
    BackendRegistry(BackendRegistry&& other) noexcept;
    BackendRegistry& operator=(BackendRegistry&& other) noexcept;

    /// Throws conflict when (role, id) is already registered.
    void register_backend(const BackendDescriptor& descriptor);
    void register_backend(std::shared_ptr<Backend> instance);

    /// Named backend, or the role's default. Throws resolution when unknown and
    /// backend-unavailable for descriptors without an implementation in this build.
    std::shared_ptr<Backend> resolve(BackendRole role, std::optional<std::string_view> id = std::nullopt) const;

    template <class T>
    std::shared_ptr<T> get(std::optional<std::string_view> id = std::nullopt) const {
        auto typed = std::dynamic_pointer_cast<T>(resolve(T::kRole, id));
        if (!typed) {
            throw Error(ErrorCode::resolution, "backend does not implement role " + std::string(role_name(T::kRole)));
        }
        return typed;
    }

    void set_default(BackendRole role, const std::string& id);
    std::optional<std::string> default_id(BackendRole role) const;
    bool contains(BackendRole role, std::string_view id) const;

    /// Registration order.
    std::vector<BackendDescriptor> descriptors() const;

    /// Manifest JSON: array of descriptors; each role's default carries "default": true.
    nlohmann::json to_manifest() const;
    static BackendRegistry from_manifest(const nlohmann::json& manifest, BackendFactory factory = default_backend_factory);
    static BackendRegistry from_manifest_file(const std::filesystem::path& path,
                                              BackendFactory factory = default_backend_factory);

    /// One stub per role, id "stub".
    static BackendRegistry with_stubs();

private:
    struct Entry {
        BackendDescriptor descriptor;
        std::shared_ptr<Backend> instance;
    };

    BackendFactory factory_;
    std::vector<Entry> entries_;
    std::map<BackendRole, std::string> defaults_;
    mutable std::shared_mutex mutex_;
};

/// Environment variable naming the backend manifest file.
inline constexpr const char* kBackendManifestEnv = "PORTRAITGEN_BACKEND_MANIFEST";

/// Registry from the manifest named by PORTRAITGEN_BACKEND_MANIFEST, or stubs when unset.
BackendRegistry registry_from_environment();

/// Hub descriptors (with their model-hub URIs) shipped in data/hub_backends.json.
std::vector<BackendDescriptor> shipped_hub_descriptors();

}  // namespace portraitgen::backends
