#include "portraitgen/geometry.h"

#include <cmath>
#include <iomanip>
#include <sstream>

#include "portraitgen/error.h"

namespace portraitgen {

Affine2 Affine2::translation(double dx, double dy) {
    Affine2 a;
    a.m = {1.0, 0.0, dx, 0.0, 1.0, dy};
    return a;
}

Affine2 Affine2::rotation(double radians, Point2 center) {
    const double c = std::cos(radians);
    const double s = std::sin(radians);
    Affine2 a;
    a.m = {c, -s, center.x - c * center.x + s * center.y,
           s, c, center.y - s * center.x - c * center.y};
    return a;
}

Affine2 Affine2::after(const Affine2& first) const {
    const auto& a = m;
    const auto& b = first.m;
    Affine2 r;
    r.m = {a[0] * b[0] + a[1] * b[3], a[0] * b[1] + a[1] * b[4], a[0] * b[2] + a[1] * b[5] + a[2],
           a[3] * b[0] + a[4] * b[3], a[3] * b[1] + a[4] * b[4], a[3] * b[2] + a[4] * b[5] + a[5]};
    return r;
}

Affine2 Affine2::inverse() const {
    const double det = determinant();
    if (!(std::abs(det) > 1e-12)) {
        throw Error(ErrorCode::degenerate_landmarks, "affine map is singular");
    }
    const double i00 = m[4] / det;
    const double i01 = -m[1] / det;
    const double i10 = -m[3] / det;
    const double i11 = m[0] / det;
    Affine2 r;
    r.m = {i00, i01, -(i00 * m[2] + i01 * m[5]), i10, i11, -(i10 * m[2] + i11 * m[5])};
    return r;
}

void require_finite(std::span<const Point2> points, const char* what) {
    for (const auto& p : points) {
        if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
            throw Error(ErrorCode::invalid_input, std::string(what) + " contains non-finite coordinates");
        }
    }
}

LandmarkSet5 to_landmarks5(std::span<const Point2> points) {
    if (points.size() != kLandmarks5) {
        throw Error(ErrorCode::invalid_input,
                    "expected 5 landmarks, got " + std::to_string(points.size()));
    }
    LandmarkSet5 out;
    std::copy(points.begin(), points.end(), out.begin());
    require_finite(out, "landmark set");
    return out;
}

LandmarkSet68 to_landmarks68(std::span<const Point2> points) {
    if (points.size() != kLandmarks68) {
        throw Error(ErrorCode::invalid_input,
                    "expected 68 landmarks, got " + std::to_string(points.size()));
    }
    LandmarkSet68 out;
    std::copy(points.begin(), points.end(), out.begin());
    require_finite(out, "landmark set");
    return out;
}

std::vector<Point2> parse_points(const std::string& text) {
    std::vector<Point2> points;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') {
            continue;
        }
        std::istringstream fields(line);
        Point2 p;
        if (!(fields >> p.x >> p.y)) {
            throw Error(ErrorCode::invalid_input, "malformed landmark line: " + line);
        }
        points.push_back(p);
    }
    return points;
}

std::string format_points(std::span<const Point2> points) {
    std::ostringstream out;
    out << std::setprecision(17);
    for (const auto& p : points) {
        out << p.x << ' ' << p.y << '\n';
    }
    return out.str();
}

}  // namespace portraitgen
