#include "portraitgen/control.h"

#include <algorithm>
#include <cmath>

#include "portraitgen/digest.h"
#include "portraitgen/error.h"

namespace portraitgen {

std::string_view pose_kind_name(PoseKind kind) {
    switch (kind) {
        case PoseKind::bone: return "bone";
        case PoseKind::bone_and_hand: return "bone+hand";
        case PoseKind::face_landmarks: return "face-landmarks";
    }
    return "bone";
}

void ControlStack::validate() const {
    if (!std::isfinite(strength) || strength < 0.0 || strength > 1.0) {
        throw Error(ErrorCode::invalid_input, "inpainting strength must lie in [0, 1]");
    }
    if (!pose && !canny && !depth && strength != 1.0) {
        throw Error(ErrorCode::invalid_input, "a control stack without controls must use strength 1.0");
    }
}

std::string ControlStack::digest() const {
    Digest d;
    d.update("control-stack/v1");
    if (pose) {
        d.update("pose").update(pose_kind_name(pose->kind));
        d.update_value(pose->width).update_value(pose->height);
        for (const auto* pts : {&pose->points, &pose->hand_points}) {
            d.update_value(static_cast<std::uint64_t>(pts->size()));
            for (const auto& p : *pts) {
                d.update_value(p.x).update_value(p.y);
            }
        }
    }
    if (canny) {
        d.update("canny").update(image_digest(canny->region)).update(image_digest(canny->edges));
    }
    if (depth) {
        d.update("depth").update(image_digest(depth->region)).update(image_digest(depth->depth));
    }
    d.update_value(strength);
    return d.hex();
}

std::vector<std::string> ControlStack::kinds() const {
    std::vector<std::string> out;
    if (pose) out.emplace_back("pose");
    if (canny) out.emplace_back("canny");
    if (depth) out.emplace_back("depth");
    return out;
}

Image edge_map(const Image& image, const Mask* region, int threshold) {
    require_valid(image, "image");
    if (region != nullptr) {
        require_mask_for(*region, image);
    }
    const Image gray = to_gray(image);
    Image out(image.width, image.height, 1);
    auto px = [&](int x, int y) {
        x = std::clamp(x, 0, gray.width - 1);
        y = std::clamp(y, 0, gray.height - 1);
        return static_cast<int>(gray.at(x, y));
    };
    for (int y = 0; y < gray.height; ++y) {
        for (int x = 0; x < gray.width; ++x) {
            if (region != nullptr && !region->at(x, y)) {
                continue;
            }
            const int gx = px(x + 1, y - 1) + 2 * px(x + 1, y) + px(x + 1, y + 1) - px(x - 1, y - 1) -
                           2 * px(x - 1, y) - px(x - 1, y + 1);
            const int gy = px(x - 1, y + 1) + 2 * px(x, y + 1) + px(x + 1, y + 1) - px(x - 1, y - 1) -
                           2 * px(x, y - 1) - px(x + 1, y - 1);
            out.at(x, y) = (std::abs(gx) + std::abs(gy)) >= threshold ? 255 : 0;
        }
    }
    return out;
}

}  // namespace portraitgen
