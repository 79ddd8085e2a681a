#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "portraitgen/backends.h"
#include "portraitgen/clock.h"
#include "portraitgen/control.h"
#include "portraitgen/generation.h"
#include "portraitgen/geometry.h"
#include "portraitgen/image.h"

namespace portraitgen::inpaint {

inline constexpr double kDefaultInpaintStrength = 0.65;
inline constexpr double kDefaultExpansionFraction = 0.05;
inline constexpr int kDefaultStage1Attempts = 3;
inline constexpr double kDefaultWindowScale = 2.5;

struct AffineFit {
    Affine2 map;
    double residual = 0.0;  // sum of squared point errors
};

/// Least-squares 2x3 map with M * src_i ~ dst_i, solved on centered coordinates.
/// Throws degenerate-landmarks for fewer than 3 points, collinear sources, or a
/// near-singular linear block (|det| <= 1e-9).
AffineFit compute_alignment_affine(std::span<const Point2> src, std::span<const Point2> dst);
AffineFit compute_alignment_affine(const LandmarkSet68& src, const LandmarkSet68& dst);

LandmarkSet68 warp_landmarks(const Affine2& map, const LandmarkSet68& landmarks);

/// Dilation by the disc {dx^2 + dy^2 <= radius^2}.
Mask expand_face_mask(const Mask& mask, int radius);

/// round(fraction * bbox diagonal).
int expansion_radius_for(const CropRect& bbox, double fraction = kDefaultExpansionFraction);

struct Stage1Result {
    Image face;
    LandmarkSet68 landmarks{};
    int attempts = 0;
    std::uint64_t seed = 0;
};

/// Pose-only text-to-image call with the identity-fused weights, face fusion with
/// the template face, then 68-point landmarks from the detector. A generation the
/// detector rejects is retried with the next seed; after `max_attempts` tries the
/// call throws stage1-failure.
Stage1Result stage1_generate_face(const PoseMap& template_pose, const generation::IdentityProfile& profile,
                                  const lora::ModelWeights& weights, const backends::BackendRegistry& registry,
                                  std::uint64_t seed, const std::string& prompt,
                                  int max_attempts = kDefaultStage1Attempts);

struct Stage2Result {
    Image portrait;
    std::string control_digest;
    std::vector<std::string> control_kinds;
    double strength = kDefaultInpaintStrength;
};

/// Inpaints `mask` of the template with pose (warped landmarks, clamped to the
/// image) and canny (edges outside the mask) controls, then applies face fusion
/// inside the mask. At strength 0 the fusion step is skipped.
Stage2Result stage2_inpaint(const Image& template_image, const LandmarkSet68& warped_landmarks, const Mask& mask,
                            const generation::IdentityProfile& profile, const lora::ModelWeights& weights,
                            const backends::BackendRegistry& registry, const backends::GenerationParams& params,
                            double strength = kDefaultInpaintStrength);

struct InpaintOptions {
    double strength = kDefaultInpaintStrength;
    double face_weight = lora::kDefaultFaceWeight;
    double expansion_fraction = kDefaultExpansionFraction;
    std::optional<int> expansion_radius;  // overrides the fraction
    int max_attempts = kDefaultStage1Attempts;
    std::uint64_t seed = 0;
    std::string prompt_extra;
    double window_scale = kDefaultWindowScale;
    /// Add the autoencoder reconstruction error back outside the face masks.
    bool compensate = true;
    /// Pixels that must not change (e.g. a garment); removed from every face mask.
    std::optional<Mask> protect;

    void validate() const;
};

struct FaceOutcome {
    std::string identity;
    CropRect bbox;
    CropRect window;
    int expansion_radius = 0;
    int attempts = 0;
    std::uint64_t seed = 0;
    double alignment_residual = 0.0;
    std::string control_digest;
};

struct InpaintResult {
    Image image;
    std::vector<FaceOutcome> faces;
    nlohmann::json manifest;
};

/// Single identity: the template's primary face is regenerated in place.
InpaintResult inpaint_portrait(const Image& template_image, const generation::IdentityProfile& profile,
                               const lora::ModelWeights& base, const backends::BackendRegistry& registry,
                               const InpaintOptions& options = {}, const Clock& clock = system_clock());

struct FaceAssignment {
    CropRect bbox;  // face box in template coordinates
    const generation::IdentityProfile* profile = nullptr;
};

/// Several identities: each face is processed on a context window (bbox scaled
/// by window_scale, clamped) and merged back. Window pixels inside another
/// face's mask are left to that face, so the result does not depend on the order
/// of `faces`. Throws overlap when expanded masks intersect.
InpaintResult multi_id_inpaint(const Image& template_image, std::span<const FaceAssignment> faces,
                               const lora::ModelWeights& base, const backends::BackendRegistry& registry,
                               const InpaintOptions& options = {}, const Clock& clock = system_clock());

/// Window around `bbox` scaled about its center, clamped to the image.
CropRect context_window(const CropRect& bbox, double scale, int image_width, int image_height);

/// crop - decode(encode(crop)), per channel, as signed values.
std::vector<int> reconstruction_error(const Image& image, const backends::Autoencoder& autoencoder);

}  // namespace portraitgen::inpaint
