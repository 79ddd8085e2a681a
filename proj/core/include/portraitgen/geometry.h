#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace portraitgen {

struct Point2 {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Point2&, const Point2&) = default;
};

/// Row-major 2x3 affine map: [x', y']^T = L [x, y]^T + t.
struct Affine2 {
    std::array<double, 6> m{1.0, 0.0, 0.0, 0.0, 1.0, 0.0};

    static Affine2 identity() { return {}; }
    static Affine2 translation(double dx, double dy);
    /// Rotation by `radians` about `center`, p -> c + R(theta) (p - c).
    static Affine2 rotation(double radians, Point2 center);

    double operator()(int row, int col) const { return m[static_cast<std::size_t>(row * 3 + col)]; }
    double& operator()(int row, int col) { return m[static_cast<std::size_t>(row * 3 + col)]; }

    Point2 apply(Point2 p) const {
        return {m[0] * p.x + m[1] * p.y + m[2], m[3] * p.x + m[4] * p.y + m[5]};
    }
    double determinant() const { return m[0] * m[4] - m[1] * m[3]; }

    /// this ∘ first: applies `first`, then this map.
    Affine2 after(const Affine2& first) const;
    Affine2 inverse() const;

    friend bool operator==(const Affine2&, const Affine2&) = default;
};

/// Integer pixel rectangle, right/bottom exclusive.
struct CropRect {
    int left = 0;
    int top = 0;
    int right = 0;
    int bottom = 0;

    int width() const { return right - left; }
    int height() const { return bottom - top; }
    bool empty() const { return right <= left || bottom <= top; }
    Point2 center() const { return {0.5 * (left + right), 0.5 * (top + bottom)}; }
    bool inside(int image_width, int image_height) const {
        return left >= 0 && top >= 0 && right <= image_width && bottom <= image_height;
    }
    bool intersects(const CropRect& other) const {
        return left < other.right && other.left < right && top < other.bottom && other.top < bottom;
    }

    friend bool operator==(const CropRect&, const CropRect&) = default;
};

inline constexpr std::size_t kLandmarks5 = 5;
inline constexpr std::size_t kLandmarks68 = 68;

/// Left eye, right eye, nose tip, left mouth corner, right mouth corner.
using LandmarkSet5 = std::array<Point2, kLandmarks5>;
/// Standard 68-point face annotation order.
using LandmarkSet68 = std::array<Point2, kLandmarks68>;

/// Throws invalid-input when any coordinate is non-finite.
void require_finite(std::span<const Point2> points, const char* what);

LandmarkSet5 to_landmarks5(std::span<const Point2> points);
LandmarkSet68 to_landmarks68(std::span<const Point2> points);

/// Parses "x y" per line. Blank lines and lines starting with '#' are ignored.
std::vector<Point2> parse_points(const std::string& text);
std::string format_points(std::span<const Point2> points);

}  // namespace portraitgen
