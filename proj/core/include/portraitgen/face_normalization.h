#pragma once

#include <array>
#include <cstdint>
#include <span>

#include "portraitgen/geometry.h"
#include "portraitgen/image.h"

namespace portraitgen::face {

/// Picks the right angle (0, 90, 180, 270) with the largest classifier
/// probability; ties resolve toward the smaller angle.
int select_image_rotation(std::span<const double, 4> probs);

/// Canonical 5-point alignment template (112x112 crop convention).
const LandmarkSet5& standard_face_template();

/// Centers the points and divides by the scalar RMS of all centered coordinates.
LandmarkSet5 normalize_landmarks(const LandmarkSet5& points);

struct RotationFit {
    double theta = 0.0;                           // radians, in (-pi, pi]
    std::array<double, 4> linear_map{};           // row-major R minimizing ||R P1^T - P2^T||^2
    double residual = 0.0;                        // squared Frobenius residual at R
};

/// Least-squares linear map from the normalized detected landmarks onto the
/// normalized template, and the rotation angle read off its second row.
RotationFit fit_face_rotation(const LandmarkSet5& detected, const LandmarkSet5& face_template);
double estimate_face_rotation(const LandmarkSet5& detected, const LandmarkSet5& face_template);

/// ||R P1^T - P2^T||^2 over already-normalized point sets.
double alignment_residual(const LandmarkSet5& p1, const LandmarkSet5& p2, const std::array<double, 4>& r);

/// Pixel-coordinate map applied by rotate_right_angle for an image of the given size.
Affine2 right_angle_transform(int degrees, int width, int height);

/// Counter-clockwise (as displayed) lossless rotation by 0, 90, 180 or 270 degrees.
/// 90/270 swap the canvas dimensions.
Image rotate_right_angle(const Image& image, int degrees);

/// Rotation about the image center that applies Affine2::rotation(radians)
/// to pixel coordinates. Same canvas, bilinear resampling, constant fill.
Image rotate_image(const Image& image, double radians, std::uint8_t fill = 0);

struct CropOptions {
    double target_ratio = 0.40;
    double min_ratio = 0.35;
    double max_ratio = 0.45;
    /// Vertical face offset as a fraction of the crop side; 0 centers the face.
    double vertical_offset = 0.0;
};

struct CropPlan {
    CropRect rect;
    double ratio = 0.0;     // max(face w, face h) / crop side
    bool centered = false;  // face center on the crop's vertical center line within 1 px
};

/// Square crop holding the face at the target size ratio, horizontally centered.
/// Falls back to the nearest in-band ratio that keeps the face centered, then to a
/// shifted crop. Throws constraint-infeasible when even the maximum ratio does not fit.
CropPlan plan_face_crop(int image_width, int image_height, const CropRect& face, const CropOptions& options = {});

CropRect crop_face_region(int image_width, int image_height, const CropRect& face, const CropOptions& options = {});

}  // namespace portraitgen::face
