#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>

#include "portraitgen/backends.h"

// Deterministic, weight-free implementations of every backend role. Fixture
// data lives in sidecar files next to the source asset ("<stem>.lm5",
// "<stem>.lm68", "<stem>.attr", ...); images carry their provenance so that
// sidecar coordinates follow rotations, crops and padding.
namespace portraitgen::backends {

std::shared_ptr<Backend> make_stub(const BackendDescriptor& descriptor);

/// Contents of "<provenance.source><extension>", if present.
std::optional<std::string> read_sidecar(const Provenance& provenance, std::string_view extension);

/// Reads the source's 5-point (and, when present, 68-point) landmark sidecars and
/// maps them into the image. Throws no-face when the sidecar is absent or every
/// face falls outside the image. Seeds listed in "fail_seeds" also yield no-face.
class StubFaceDetector : public FaceDetector {
public:
    explicit StubFaceDetector(BackendDescriptor descriptor);
    std::vector<FaceDetection> detect(const Image& image) const override;

private:
    std::set<std::uint64_t> fail_seeds_;
};

/// Face box derived from 5 landmarks: square of side 2x the landmark extent,
/// centered on the landmark bounding box.
CropRect face_box_from_landmarks(const LandmarkSet5& landmarks);

class StubRotationClassifier : public RotationClassifier {
public:
    using RotationClassifier::RotationClassifier;
    /// "<stem>.rot": four probabilities for the source asset, re-indexed by the quarter
    /// turns already in the image provenance. Without a sidecar the image is reported upright.
    std::array<double, 4> predict(const Image& image) const override;
};

class StubHumanParser : public HumanParser {
public:
    using HumanParser::HumanParser;
    /// Ellipse inscribed in the face box grown by 1.3x.
    Mask head_mask(const Image& image, const CropRect& face) const override;
    /// Ellipse inscribed in the face box.
    Mask face_mask(const Image& image, const CropRect& face) const override;
    /// "<stem>.body.png" when it matches an untransformed image, else the whole frame.
    Mask body_mask(const Image& image) const override;
};

class StubSkinRetoucher : public SkinRetoucher {
public:
    using SkinRetoucher::SkinRetoucher;
    /// 3x3 box filter inside the region.
    Image retouch(const Image& image, const Mask& region) const override;
};

class StubTagger : public Tagger {
public:
    using Tagger::Tagger;
    /// "<stem>.tags": one tag per line; no sidecar means no tags.
    std::vector<std::string> tag(const Image& image) const override;
};

class StubAttributePredictor : public AttributePredictor {
public:
    using AttributePredictor::AttributePredictor;
    /// "<stem>.attr": line 1 "p_male p_female", line 2 age-bin probabilities,
    /// optional line 3 bin edges (FairFace bins otherwise).
    labeling::AttributePrediction predict(const Image& image) const override;
};

class StubQualityAssessor : public QualityAssessor {
public:
    using QualityAssessor::QualityAssessor;
    /// Fraction of the crop covered by the head mask.
    double score(const Image& face_crop, const Mask& head_mask) const override;
};

class StubFaceEmbedder : public FaceEmbedder {
public:
    using FaceEmbedder::FaceEmbedder;
    static constexpr int kDims = 64;
    /// 8x8 area-averaged grayscale, mean-centered, L2-normalized.
    std::vector<double> embed(const Image& face) const override;
};

class StubFaceFusion : public FaceFusion {
public:
    using FaceFusion::FaceFusion;
    /// (3 * target + template resized to the target) / 4, rounded.
    Image fuse(const Image& target, const Image& template_face, const Mask* region) const override;
};

class StubTextToImage : public TextToImage {
public:
    explicit StubTextToImage(BackendDescriptor descriptor);
    /// Pure function of (prompt, negative prompt, seed, weights digest, control digest).
    /// With a pose control the canvas and provenance follow the pose, with a
    /// seed-dependent similarity jitter.
    Image generate(const lora::ModelWeights& weights, const GenerationParams& params,
                   const ControlStack* controls) const override;

    /// The jitter applied to pose-driven generations for `seed`.
    static Affine2 pose_jitter(std::uint64_t seed, int width, int height);

private:
    int width_ = 128;
    int height_ = 128;
};

class StubInpainter : public Inpainter {
public:
    using Inpainter::Inpainter;
    /// Unmasked pixels are copied bit-exactly; masked pixels become
    /// round((1 - s) * image + s * generated).
    Image inpaint(const lora::ModelWeights& weights, const Image& image, const Mask& mask,
                  const GenerationParams& params, const ControlStack& controls) const override;
};

class StubPoseEstimator : public PoseEstimator {
public:
    using PoseEstimator::PoseEstimator;
    /// "<stem>.pose" (required) and "<stem>.hand" (optional, bone+hand only), "x y" per line.
    PoseMap estimate(const Image& image, PoseKind kind) const override;
};

class StubDepthEstimator : public DepthEstimator {
public:
    using DepthEstimator::DepthEstimator;
    /// "<stem>.depth" (required): its digest seeds a smooth depth ramp inside the region.
    Image estimate(const Image& image, const Mask& region) const override;
};

class StubAutoencoder : public Autoencoder {
public:
    explicit StubAutoencoder(BackendDescriptor descriptor);
    /// Rounds every channel value down to a multiple of "quantum" (default 4; 1 is lossless).
    Latent encode(const Image& image) const override;
    Image decode(const Latent& latent) const override;

private:
    int quantum_ = 4;
};

class StubTalkingHeadDriver : public TalkingHeadDriver {
public:
    explicit StubTalkingHeadDriver(BackendDescriptor descriptor);
    /// resolution x resolution clip lasting exactly as long as the audio.
    VideoClip drive(const Image& portrait, const Audio& audio, const TalkingHeadParams& params) const override;

private:
    double fps_ = 25.0;
};

class StubUpscaler : public Upscaler {
public:
    using Upscaler::Upscaler;
    VideoClip upscale(const VideoClip& clip) const override;
};

class StubTts : public Tts {
public:
    explicit StubTts(BackendDescriptor descriptor);
    /// 16 kHz mono sine tones, 0.08 s per character (UTF-8 code point).
    Audio synthesize(const std::string& text, const std::string& voice) const override;

private:
    int sample_rate_ = 16000;
    double seconds_per_char_ = 0.08;
};

std::size_t utf8_length(std::string_view text);

}  // namespace portraitgen::backends
