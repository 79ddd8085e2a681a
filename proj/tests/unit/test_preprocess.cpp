#include <gtest/gtest.h>

#include <cmath>

#include "fixtures.h"
#include "portraitgen/error.h"
#include "portraitgen/preprocess.h"

using namespace portraitgen;
using namespace portraitgen::face;

namespace {

std::vector<Image> load_all(const std::vector<pgtest::fs::path>& paths) {
    std::vector<Image> out;
    for (const auto& p : paths) out.push_back(load_image_asset(p));
    return out;
}

double eye_line_angle(const LandmarkSet5& lm) { return std::atan2(lm[1].y - lm[0].y, lm[1].x - lm[0].x); }

// Aligned faces inherit the template's slight eye tilt.
const double kTemplateEyeAngle = eye_line_angle(standard_face_template());

}  // namespace

class PreprocessTest : public ::testing::Test {
protected:
    backends::BackendRegistry reg = backends::BackendRegistry::with_stubs();
    pgtest::TempDir dir;
};

TEST_F(PreprocessTest, ThreeFixturesGiveThreeNormalizedRecords) {
    const auto images = load_all(pgtest::write_training_set(dir.path(), 3));
    const auto result = run_preprocess_chain(images, reg);
    ASSERT_EQ(result.faces.size(), 3u);
    EXPECT_TRUE(result.skipped.empty());
    for (std::size_t i = 0; i < 3; ++i) {
        const auto& r = result.faces[i];
        EXPECT_EQ(r.input_index, i);
        EXPECT_EQ(r.image.width, r.image.height);
        EXPECT_TRUE(r.retouched);
        EXPECT_NEAR(eye_line_angle(r.landmarks), kTemplateEyeAngle, 1e-6);
        EXPECT_GE(r.crop_ratio, 0.35 - 1e-9);
        EXPECT_LE(r.crop_ratio, 0.45 + 1e-9);
        // Face box centered within a pixel.
        const auto c = r.bbox.center();
        EXPECT_NEAR(c.x, 0.5 * r.image.width, 1.0);
        EXPECT_EQ(r.head_mask.width, r.image.width);
        EXPECT_GT(mask_count(r.head_mask), 0u);
    }
}

TEST_F(PreprocessTest, FacelessImageIsSkippedWithReason) {
    auto paths = pgtest::write_training_set(dir.path(), 2);
    pgtest::PortraitSpec bare;
    bare.name = "landscape";
    bare.faces = {};
    paths.insert(paths.begin() + 1, pgtest::write_portrait(dir.path(), bare));
    const auto images = load_all(paths);
    const auto result = run_preprocess_chain(images, reg);
    ASSERT_EQ(result.skipped.size(), 1u);
    EXPECT_EQ(result.skipped[0].input_index, 1u);
    EXPECT_EQ(result.skipped[0].reason, "no-face");
    EXPECT_EQ(result.skipped[0].image_ref, images[1].provenance.source);
    EXPECT_EQ(result.faces.size() + result.skipped.size(), images.size());
    EXPECT_EQ(result.faces[1].input_index, 2u);
}

TEST_F(PreprocessTest, AllFacelessIsEmptyTrainingSet) {
    const std::vector<Image> images{pgtest::pattern_image(64, 64, 1), pgtest::pattern_image(64, 64, 2)};
    try {
        run_preprocess_chain(images, reg);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::empty_training_set);
    }
    EXPECT_THROW(run_preprocess_chain(std::span<const Image>{}, reg), Error);
}

TEST_F(PreprocessTest, ConfigurationErrorsPropagate) {
    backends::BackendRegistry empty;
    const auto images = load_all(pgtest::write_training_set(dir.path(), 1));
    try {
        run_preprocess_chain(images, empty);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::resolution);
    }
}

TEST_F(PreprocessTest, RotatedUploadsAreRecovered) {
    for (int k = 1; k < 4; ++k) {
        pgtest::PortraitSpec spec;
        spec.name = "turned" + std::to_string(k);
        spec.faces = {pgtest::FaceSpec{{110, 140}, 28, 0.15}};
        spec.stored_quarter_turns = k;
        spec.write_rot = true;
        const auto r = preprocess_image(load_image_asset(pgtest::write_portrait(dir.path(), spec)), reg);
        EXPECT_EQ(r.image_rotation, (4 - k) % 4 * 90);
        EXPECT_NEAR(r.face_angle, -0.15, 1e-6);
        EXPECT_NEAR(eye_line_angle(r.landmarks), kTemplateEyeAngle, 1e-6);
    }
}

TEST_F(PreprocessTest, EdgeFaceIsPadded) {
    pgtest::PortraitSpec spec;
    spec.faces = {pgtest::FaceSpec{{20, 128}, 24, 0.0}};
    const auto r = preprocess_image(load_image_asset(pgtest::write_portrait(dir.path(), spec)), reg);
    EXPECT_TRUE(r.padded);
    EXPECT_NEAR(r.crop_ratio, 0.40, 0.01);
    EXPECT_NEAR(r.bbox.center().x, 0.5 * r.image.width, 1.0);
}

TEST_F(PreprocessTest, NormalizingTwiceChangesNothingGeometric) {
    const auto images = load_all(pgtest::write_training_set(dir.path(), 2));
    for (const auto& img : images) {
        const auto once = preprocess_image(img, reg);
        const auto twice = preprocess_image(once.image, reg);
        EXPECT_EQ(twice.image_rotation, 0);
        EXPECT_NEAR(twice.face_angle, 0.0, 1e-6);
        EXPECT_NEAR(twice.crop_ratio, once.crop_ratio, 0.02);
        for (std::size_t i = 0; i < 5; ++i) {
            EXPECT_NEAR(twice.landmarks[i].x, once.landmarks[i].x, 1.0);
            EXPECT_NEAR(twice.landmarks[i].y, once.landmarks[i].y, 1.0);
        }
    }
}

TEST(PrimaryFace, LargestBoxFirstOnTies) {
    std::vector<backends::FaceDetection> faces(3);
    faces[0].bbox = {0, 0, 10, 10};
    faces[1].bbox = {0, 0, 20, 20};
    faces[2].bbox = {5, 5, 25, 25};
    EXPECT_EQ(primary_face(faces), 1u);
    EXPECT_THROW(primary_face({}), Error);
}
