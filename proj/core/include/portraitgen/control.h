#pragma once

#include <optional>
#include <string>
#include <vector>

#include "portraitgen/geometry.h"
#include "portraitgen/image.h"

namespace portraitgen {

enum class PoseKind { bone, bone_and_hand, face_landmarks };

std::string_view pose_kind_name(PoseKind kind);

/// Keypoint conditioning for an OpenPose-style control. Points are in the
/// pixel coordinates of the image the pose was estimated on.
struct PoseMap {
    PoseKind kind = PoseKind::bone;
    std::vector<Point2> points;
    std::vector<Point2> hand_points;
    int width = 0;
    int height = 0;
    Provenance provenance;

    bool has_hands() const { return !hand_points.empty(); }
};

struct EdgeControl {
    Mask region;
    Image edges;
};

struct DepthControl {
    Mask region;
    Image depth;
};

/// Spatial conditioning inputs plus inpainting strength for one diffusion call.
struct ControlStack {
    std::optional<PoseMap> pose;
    std::optional<EdgeControl> canny;
    std::optional<DepthControl> depth;
    double strength = 1.0;

    /// Throws invalid-input unless strength is in [0, 1] and there is at least
    /// one control or strength == 1.
    void validate() const;
    /// Canonical digest over every control and the strength.
    std::string digest() const;
    /// Names of the controls present, in a fixed order ("pose", "canny", "depth").
    std::vector<std::string> kinds() const;
};

/// Binary edge map (0/255) from Sobel gradient magnitude, restricted to `region` when given.
Image edge_map(const Image& image, const Mask* region = nullptr, int threshold = 96);

}  // namespace portraitgen
