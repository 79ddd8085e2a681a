#include "portraitgen/face_normalization.h"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "portraitgen/error.h"

namespace portraitgen::face {

int select_image_rotation(std::span<const double, 4> probs) {
    std::size_t best = 0;
    bool any_positive = false;
    for (std::size_t i = 0; i < 4; ++i) {
        if (!std::isfinite(probs[i]) || probs[i] < 0.0) {
            throw Error(ErrorCode::invalid_input, "rotation probabilities must be finite and non-negative");
        }
        any_positive = any_positive || probs[i] > 0.0;
        if (probs[i] > probs[best]) {
            best = i;
        }
    }
    if (!any_positive) {
        throw Error(ErrorCode::invalid_input, "rotation probabilities are all zero");
    }
    return static_cast<int>(best) * 90;
}

const LandmarkSet5& standard_face_template() {
    static const LandmarkSet5 kTemplate = {{
        {38.2946, 51.6963},
        {73.5318, 51.5014},
        {56.0252, 71.7366},
        {41.5493, 92.3655},
        {70.7299, 92.2041},
    }};
    return kTemplate;
}

LandmarkSet5 normalize_landmarks(const LandmarkSet5& points) {
    require_finite(points, "landmark set");
    double mx = 0.0;
    double my = 0.0;
    for (const auto& p : points) {
        mx += p.x;
        my += p.y;
    }
    mx /= static_cast<double>(points.size());
    my /= static_cast<double>(points.size());
    double sq = 0.0;
    for (const auto& p : points) {
        sq += (p.x - mx) * (p.x - mx) + (p.y - my) * (p.y - my);
    }
    const double rms = std::sqrt(sq / (2.0 * static_cast<double>(points.size())));
    if (!(rms > 0.0)) {
        throw Error(ErrorCode::degenerate_landmarks, "landmarks have zero spread");
    }
    LandmarkSet5 out;
    for (std::size_t i = 0; i < points.size(); ++i) {
        out[i] = {(points[i].x - mx) / rms, (points[i].y - my) / rms};
    }
    return out;
}

double alignment_residual(const LandmarkSet5& p1, const LandmarkSet5& p2, const std::array<double, 4>& r) {
    double res = 0.0;
    for (std::size_t i = 0; i < p1.size(); ++i) {
        const double ex = r[0] * p1[i].x + r[1] * p1[i].y - p2[i].x;
        const double ey = r[2] * p1[i].x + r[3] * p1[i].y - p2[i].y;
        res += ex * ex + ey * ey;
    }
    return res;
}

RotationFit fit_face_rotation(const LandmarkSet5& detected, const LandmarkSet5& face_template) {
    const auto p1 = normalize_landmarks(detected);
    const auto p2 = normalize_landmarks(face_template);

    // Normal equations: X = (P1^T P1)^-1 P1^T P2, R = X^T.
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    double cxx = 0.0, cxy = 0.0, cyx = 0.0, cyy = 0.0;  // P1^T P2
    for (std::size_t i = 0; i < p1.size(); ++i) {
        sxx += p1[i].x * p1[i].x;
        sxy += p1[i].x * p1[i].y;
        syy += p1[i].y * p1[i].y;
        cxx += p1[i].x * p2[i].x;
        cxy += p1[i].x * p2[i].y;
        cyx += p1[i].y * p2[i].x;
        cyy += p1[i].y * p2[i].y;
    }
    const double det = sxx * syy - sxy * sxy;
    const double trace = sxx + syy;
    if (!(det > 1e-10 * trace * trace)) {
        throw Error(ErrorCode::degenerate_landmarks, "detected landmarks are collinear");
    }
    const double i00 = syy / det;
    const double i01 = -sxy / det;
    const double i11 = sxx / det;
    const double x00 = i00 * cxx + i01 * cyx;
    const double x01 = i00 * cxy + i01 * cyy;
    const double x10 = i01 * cxx + i11 * cyx;
    const double x11 = i01 * cxy + i11 * cyy;

    RotationFit fit;
    fit.linear_map = {x00, x10, x01, x11};
    fit.theta = std::atan2(fit.linear_map[2], fit.linear_map[3]);
    if (fit.theta <= -std::numbers::pi) {
        fit.theta = std::numbers::pi;
    }
    fit.residual = alignment_residual(p1, p2, fit.linear_map);
    return fit;
}

double estimate_face_rotation(const LandmarkSet5& detected, const LandmarkSet5& face_template) {
    return fit_face_rotation(detected, face_template).theta;
}

Affine2 right_angle_transform(int degrees, int width, int height) {
    Affine2 t;
    switch (((degrees % 360) + 360) % 360) {
        case 0: break;
        case 90: t.m = {0, 1, 0, -1, 0, static_cast<double>(width - 1)}; break;
        case 180: t.m = {-1, 0, static_cast<double>(width - 1), 0, -1, static_cast<double>(height - 1)}; break;
        case 270: t.m = {0, -1, static_cast<double>(height - 1), 1, 0, 0}; break;
        default: throw Error(ErrorCode::invalid_input, "rotation must be a multiple of 90 degrees");
    }
    return t;
}

Image rotate_right_angle(const Image& image, int degrees) {
    require_valid(image, "image");
    const int norm = ((degrees % 360) + 360) % 360;
    const auto t = right_angle_transform(norm, image.width, image.height);
    const bool swap = norm == 90 || norm == 270;
    Image out(swap ? image.height : image.width, swap ? image.width : image.height, image.channels);
    for (int y = 0; y < image.height; ++y) {
        for (int x = 0; x < image.width; ++x) {
            const auto q = t.apply({static_cast<double>(x), static_cast<double>(y)});
            const int qx = static_cast<int>(std::lround(q.x));
            const int qy = static_cast<int>(std::lround(q.y));
            for (int c = 0; c < image.channels; ++c) {
                out.at(qx, qy, c) = image.at(x, y, c);
            }
        }
    }
    out.provenance = image.provenance;
    out.provenance.transform = t.after(image.provenance.transform);
    return out;
}

Image rotate_image(const Image& image, double radians, std::uint8_t fill) {
    require_valid(image, "image");
    if (!std::isfinite(radians)) {
        throw Error(ErrorCode::invalid_input, "rotation angle must be finite");
    }
    const Point2 center{0.5 * (image.width - 1), 0.5 * (image.height - 1)};
    const auto forward = Affine2::rotation(radians, center);
    Image out = image;
    out.provenance.transform = forward.after(image.provenance.transform);
    if (radians == 0.0) {
        return out;
    }
    const auto backward = Affine2::rotation(-radians, center);
    auto sample = [&](int x, int y, int c) -> double {
        if (x < 0 || y < 0 || x >= image.width || y >= image.height) {
            return fill;
        }
        return image.at(x, y, c);
    };
    for (int y = 0; y < out.height; ++y) {
        for (int x = 0; x < out.width; ++x) {
            const auto p = backward.apply({static_cast<double>(x), static_cast<double>(y)});
            const double fx = std::floor(p.x);
            const double fy = std::floor(p.y);
            const int x0 = static_cast<int>(fx);
            const int y0 = static_cast<int>(fy);
            const double ax = p.x - fx;
            const double ay = p.y - fy;
            for (int c = 0; c < image.channels; ++c) {
                const double v = (1 - ax) * (1 - ay) * sample(x0, y0, c) + ax * (1 - ay) * sample(x0 + 1, y0, c) +
                                 (1 - ax) * ay * sample(x0, y0 + 1, c) + ax * ay * sample(x0 + 1, y0 + 1, c);
                out.at(x, y, c) = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
            }
        }
    }
    return out;
}

CropPlan plan_face_crop(int image_width, int image_height, const CropRect& face, const CropOptions& options) {
    if (image_width <= 0 || image_height <= 0) {
        throw Error(ErrorCode::invalid_input, "image dimensions must be positive");
    }
    if (face.empty() || !face.inside(image_width, image_height)) {
        throw Error(ErrorCode::invalid_input, "face box must be non-empty and inside the image");
    }
    if (!(options.min_ratio > 0.0 && options.min_ratio <= options.target_ratio &&
          options.target_ratio <= options.max_ratio && options.max_ratio <= 1.0)) {
        throw Error(ErrorCode::invalid_config, "crop ratios must satisfy 0 < min <= target <= max <= 1");
    }
    const double side = std::max(face.width(), face.height());
    const auto center = face.center();
    const int limit = std::min(image_width, image_height);
    const int smallest = static_cast<int>(std::ceil(side / options.max_ratio - 1e-9));
    const int largest = static_cast<int>(std::floor(side / options.min_ratio + 1e-9));
    if (smallest > limit) {
        throw Error(ErrorCode::constraint_infeasible, "face too large for the image even at the maximum ratio");
    }
    const int target = std::clamp(static_cast<int>(std::lround(side / options.target_ratio)), smallest, largest);

    auto place_vertical = [&](int s) {
        const double top = center.y - 0.5 * s + options.vertical_offset * s;
        return std::clamp(static_cast<int>(std::lround(top)), 0, image_height - s);
    };
    auto centered_left = [&](int s) { return static_cast<int>(std::lround(center.x - 0.5 * s)); };

    // Shrinking the crop is the only way to make a centered placement fit, so walk down from the target.
    for (int s = std::min(target, limit); s >= smallest; --s) {
        const int left = std::clamp(centered_left(s), 0, image_width - s);
        if (std::abs(left + 0.5 * s - center.x) <= 1.0) {
            const int top = place_vertical(s);
            return {{left, top, left + s, top + s}, side / s, true};
        }
    }
    const int s = std::min(target, limit);
    const int left = std::clamp(centered_left(s), 0, image_width - s);
    const int top = place_vertical(s);
    const CropRect rect{left, top, left + s, top + s};
    return {rect, side / s, std::abs(rect.center().x - center.x) <= 1.0};
}

CropRect crop_face_region(int image_width, int image_height, const CropRect& face, const CropOptions& options) {
    return plan_face_crop(image_width, image_height, face, options).rect;
}

}  // namespace portraitgen::face
