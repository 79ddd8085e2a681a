#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "portraitgen/backends.h"
#include "portraitgen/face_normalization.h"
#include "portraitgen/image.h"

namespace portraitgen::face {

/// One normalized training face. Coordinates are in the crop's pixel grid.
struct FaceRecord {
    std::size_t input_index = 0;
    std::string image_ref;      // provenance source of the upload
    Image image;                // retouched square crop
    LandmarkSet5 landmarks{};
    Mask head_mask;
    CropRect bbox;
    bool retouched = false;

    int image_rotation = 0;     // right angle applied first, degrees
    double face_angle = 0.0;    // radians applied by the fine rotation
    CropRect crop;              // crop rectangle in the rotated (and possibly padded) image
    double crop_ratio = 0.0;
    bool padded = false;
};

struct SkipRecord {
    std::size_t input_index = 0;
    std::string image_ref;
    std::string reason;  // error code name, e.g. "no-face"
    std::string detail;
};

struct PreprocessOptions {
    CropOptions crop;
    std::uint8_t pad_fill = 0;
};

struct PreprocessResult {
    std::vector<FaceRecord> faces;
    std::vector<SkipRecord> skipped;
};

/// Runs rotation -> detection -> face rotation -> re-detection -> crop -> head
/// mask -> retouch on every image. Images a backend rejects are skipped with the
/// error code as reason; configuration errors propagate. Throws
/// empty-training-set when no image survives.
PreprocessResult run_preprocess_chain(std::span<const Image> images, const backends::BackendRegistry& registry,
                                      const PreprocessOptions& options = {});

/// Normalizes a single image; throws the backend's error instead of skipping.
FaceRecord preprocess_image(const Image& image, const backends::BackendRegistry& registry,
                            const PreprocessOptions& options = {});

/// Index of the detection with the largest box area; ties go to the earlier one.
std::size_t primary_face(std::span<const backends::FaceDetection> faces);

}  // namespace portraitgen::face
