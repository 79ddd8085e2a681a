#include "portraitgen/preprocess.h"

#include <algorithm>
#include <cmath>

#include "portraitgen/error.h"

namespace portraitgen::face {

using backends::BackendRegistry;
using backends::FaceDetection;

std::size_t primary_face(std::span<const FaceDetection> faces) {
    if (faces.empty()) {
        throw Error(ErrorCode::no_face, "detector returned no faces");
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < faces.size(); ++i) {
        const auto area = [](const CropRect& r) { return static_cast<long long>(r.width()) * r.height(); };
        if (area(faces[i].bbox) > area(faces[best].bbox)) {
            best = i;
        }
    }
    return best;
}

namespace {

bool is_configuration_error(ErrorCode code) {
    return code == ErrorCode::resolution || code == ErrorCode::backend_unavailable ||
           code == ErrorCode::invalid_config || code == ErrorCode::internal;
}

FaceDetection detect_primary(const backends::FaceDetector& detector, const Image& image) {
    const auto faces = detector.detect(image);
    return faces[primary_face(faces)];
}

}  // namespace

FaceRecord preprocess_image(const Image& input, const BackendRegistry& registry, const PreprocessOptions& options) {
    require_valid(input, "image");
    const auto classifier = registry.get<backends::RotationClassifier>();
    const auto detector = registry.get<backends::FaceDetector>();
    const auto parser = registry.get<backends::HumanParser>();
    const auto retoucher = registry.get<backends::SkinRetoucher>();

    FaceRecord record;
    record.image_ref = input.provenance.source;

    const auto probs = classifier->predict(input);
    record.image_rotation = select_image_rotation(probs);
    Image image = rotate_right_angle(input, record.image_rotation);

    const auto first = detect_primary(*detector, image);
    record.face_angle = estimate_face_rotation(first.landmarks, standard_face_template());
    image = rotate_image(image, record.face_angle, options.pad_fill);

    auto face = detect_primary(*detector, image);
    CropPlan plan;
    bool need_pad = false;
    try {
        plan = plan_face_crop(image.width, image.height, face.bbox, options.crop);
        need_pad = !plan.centered;
    } catch (const Error& e) {
        if (e.code() != ErrorCode::constraint_infeasible) {
            throw;
        }
        need_pad = true;
    }
    if (need_pad) {
        const double side = std::max(face.bbox.width(), face.bbox.height());
        const int s = static_cast<int>(std::lround(side / options.crop.target_ratio));
        const auto c = face.bbox.center();
        const int left = static_cast<int>(std::lround(c.x - 0.5 * s));
        const int top = static_cast<int>(std::lround(c.y - 0.5 * s + options.crop.vertical_offset * s));
        const int pl = std::max(0, -left);
        const int pt = std::max(0, -top);
        const int pr = std::max(0, left + s - image.width);
        const int pb = std::max(0, top + s - image.height);
        image = pad(image, pl, pt, pr, pb, options.pad_fill);
        face.bbox = {face.bbox.left + pl, face.bbox.top + pt, face.bbox.right + pl, face.bbox.bottom + pt};
        for (auto& p : face.landmarks) {
            p = {p.x + pl, p.y + pt};
        }
        plan = plan_face_crop(image.width, image.height, face.bbox, options.crop);
        record.padded = true;
    }
    record.crop = plan.rect;
    record.crop_ratio = plan.ratio;

    Image cropped = portraitgen::crop(image, plan.rect);
    const double dx = plan.rect.left;
    const double dy = plan.rect.top;
    for (std::size_t i = 0; i < face.landmarks.size(); ++i) {
        record.landmarks[i] = {face.landmarks[i].x - dx, face.landmarks[i].y - dy};
    }
    record.bbox = {std::max(0, face.bbox.left - plan.rect.left), std::max(0, face.bbox.top - plan.rect.top),
                   std::min(cropped.width, face.bbox.right - plan.rect.left),
                   std::min(cropped.height, face.bbox.bottom - plan.rect.top)};

    record.head_mask = parser->head_mask(cropped, record.bbox);
    require_mask_for(record.head_mask, cropped);
    const Mask skin = parser->face_mask(cropped, record.bbox);
    record.image = retoucher->retouch(cropped, skin);
    record.retouched = true;
    return record;
}

PreprocessResult run_preprocess_chain(std::span<const Image> images, const BackendRegistry& registry,
                                      const PreprocessOptions& options) {
    PreprocessResult result;
    for (std::size_t i = 0; i < images.size(); ++i) {
        try {
            auto record = preprocess_image(images[i], registry, options);
            record.input_index = i;
            result.faces.push_back(std::move(record));
        } catch (const Error& e) {
            if (is_configuration_error(e.code())) {
                throw;
            }
            result.skipped.push_back(
                {i, images[i].provenance.source, std::string(error_code_name(e.code())), e.detail()});
        }
    }
    if (result.faces.empty()) {
        throw Error(ErrorCode::empty_training_set,
                    "no usable face among " + std::to_string(images.size()) + " image(s)");
    }
    return result;
}

}  // namespace portraitgen::face
