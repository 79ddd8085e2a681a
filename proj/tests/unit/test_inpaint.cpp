#include <gtest/gtest.h>

#include <random>

#include "fixtures.h"
#include "portraitgen/error.h"
#include "portraitgen/inpaint.h"

using namespace portraitgen;
using namespace portraitgen::inpaint;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no error thrown";
    return ErrorCode::internal;
}

// Brute-force disc dilation, independent of the library's implementation.
Mask dilate_reference(const Mask& m, int r) {
    Mask out = make_mask(m.width, m.height);
    for (int y = 0; y < m.height; ++y)
        for (int x = 0; x < m.width; ++x) {
            if (!m.at(x, y)) continue;
            for (int dy = -r; dy <= r; ++dy)
                for (int dx = -r; dx <= r; ++dx) {
                    const int u = x + dx, v = y + dy;
                    if (dx * dx + dy * dy <= r * r && u >= 0 && v >= 0 && u < m.width && v < m.height)
                        out.at(u, v) = 255;
                }
        }
    return out;
}

Mask union_of(const std::vector<Mask>& masks, int w, int h) {
    Mask out = make_mask(w, h);
    for (const auto& m : masks) out = mask_union(out, m);
    return out;
}

const TimePoint kFixed = parse_iso8601("2026-01-01T00:00:00.000Z");

}  // namespace

TEST(Affine, ExactFitExample) {
    // numpy lstsq oracle on dst = 2 * src + (5, 7): [[2,0,5],[0,2,7]].
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0, 100);
    std::vector<Point2> src(68), dst(68);
    for (std::size_t i = 0; i < 68; ++i) {
        src[i] = {u(rng), u(rng)};
        dst[i] = {2 * src[i].x + 5, 2 * src[i].y + 7};
    }
    const auto fit = compute_alignment_affine(src, dst);
    const std::array<double, 6> expected{2, 0, 5, 0, 2, 7};
    for (std::size_t k = 0; k < 6; ++k) EXPECT_NEAR(fit.map.m[k], expected[k], 1e-9);
    EXPECT_NEAR(fit.residual, 0.0, 1e-12);
    const auto p = fit.map.apply({1, 1});
    EXPECT_NEAR(p.x, 7, 1e-9);
    EXPECT_NEAR(p.y, 9, 1e-9);
}

TEST(Affine, RandomMapsRoundTrip) {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(-3, 3), pos(0, 200);
    for (int t = 0; t < 200; ++t) {
        Affine2 a;
        a.m = {u(rng), u(rng), 50 * u(rng), u(rng), u(rng), 50 * u(rng)};
        if (std::abs(a.determinant()) < 0.1) continue;
        LandmarkSet68 src{}, dst{};
        for (std::size_t i = 0; i < 68; ++i) {
            src[i] = {pos(rng), pos(rng)};
            dst[i] = a.apply(src[i]);
        }
        const auto fit = compute_alignment_affine(src, dst);
        for (std::size_t k = 0; k < 6; ++k) EXPECT_NEAR(fit.map.m[k], a.m[k], 1e-7);
        const auto back = warp_landmarks(fit.map.inverse(), dst);
        for (std::size_t i = 0; i < 68; ++i) {
            EXPECT_NEAR(back[i].x, src[i].x, 1e-7);
            EXPECT_NEAR(back[i].y, src[i].y, 1e-7);
        }
    }
}

TEST(Affine, DegenerateInputs) {
    std::vector<Point2> line{{0, 0}, {1, 1}, {2, 2}, {3, 3}};
    EXPECT_EQ(code_of([&] { compute_alignment_affine(line, line); }), ErrorCode::degenerate_landmarks);
    std::vector<Point2> two{{0, 0}, {1, 0}};
    EXPECT_EQ(code_of([&] { compute_alignment_affine(two, two); }), ErrorCode::degenerate_landmarks);
    std::vector<Point2> tri{{0, 0}, {1, 0}, {0, 1}};
    std::vector<Point2> flat{{0, 0}, {1, 0}, {2, 0}};
    EXPECT_EQ(code_of([&] { compute_alignment_affine(tri, flat); }), ErrorCode::degenerate_landmarks);
}

TEST(MaskExpansion, DiscCounts) {
    // Single pixel dilated by r: 1, 5, 13, 29, 49, 81 (brute-force oracle).
    const std::size_t expected[] = {1, 5, 13, 29, 49, 81};
    for (int r = 0; r <= 5; ++r) {
        Mask m = make_mask(21, 21);
        m.at(10, 10) = 255;
        EXPECT_EQ(mask_count(expand_face_mask(m, r)), expected[r]) << r;
    }
}

TEST(MaskExpansion, MatchesReferenceAndContainsInput) {
    std::mt19937_64 rng(3);
    for (int t = 0; t < 40; ++t) {
        Mask m = make_mask(40, 30);
        std::uniform_int_distribution<int> x(0, 39), y(0, 29);
        for (int k = 0; k < 6; ++k) m.at(x(rng), y(rng)) = 255;
        const int r = t % 6;
        const Mask e = expand_face_mask(m, r);
        EXPECT_TRUE(e.same_pixels(dilate_reference(m, r)));
        EXPECT_TRUE(mask_subtract(m, e).pixels == make_mask(40, 30).pixels);
        EXPECT_TRUE(expand_face_mask(m, 0).same_pixels(m));
        // Dilating by a then b stays inside dilation by a + b (discrete discs only give containment).
        const Mask ab = expand_face_mask(expand_face_mask(m, r), 2);
        EXPECT_EQ(mask_count(mask_subtract(ab, expand_face_mask(m, r + 2))), 0u);
    }
}

TEST(MaskExpansion, RadiusFromBox) {
    EXPECT_EQ(expansion_radius_for({0, 0, 100, 100}), 7);  // round(0.05 * 141.42)
    EXPECT_EQ(expansion_radius_for({0, 0, 30, 40}, 0.1), 5);
    EXPECT_EQ(context_window({40, 40, 60, 60}, 2.0, 100, 100), (CropRect{30, 30, 70, 70}));
    EXPECT_EQ(context_window({0, 0, 20, 20}, 3.0, 50, 50), (CropRect{0, 0, 40, 40}));
}

class InpaintTest : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        dir_ = new pgtest::TempDir;
        std::vector<Image> a, b;
        const auto set = pgtest::write_training_set(dir_->path(), 4);
        a = {load_image_asset(set[0]), load_image_asset(set[1])};
        b = {load_image_asset(set[2]), load_image_asset(set[3])};
        alice_ = new generation::IdentityProfile(generation::train_identity(a, registry(), base()));
        bob_ = new generation::IdentityProfile(generation::train_identity(b, registry(), base()));
    }
    static void TearDownTestSuite() {
        delete alice_;
        delete bob_;
        delete dir_;
    }
    static const backends::BackendRegistry& registry() {
        static const auto r = backends::BackendRegistry::with_stubs();
        return r;
    }
    static const lora::ModelWeights& base() {
        static const auto b = lora::toy_base_model();
        return b;
    }
    static Image group(int faces = 2) {
        return load_image_asset(pgtest::write_group_fixture(dir_->path(), "group" + std::to_string(faces), faces));
    }
    static std::vector<FaceAssignment> assign(const Image& img) {
        auto faces = registry().get<backends::FaceDetector>()->detect(img);
        std::sort(faces.begin(), faces.end(), [](auto& x, auto& y) { return x.bbox.left < y.bbox.left; });
        return {{faces[0].bbox, alice_}, {faces[1].bbox, bob_}};
    }
    static Mask faces_mask(const Image& img, const std::vector<FaceAssignment>& faces, const InpaintOptions& o) {
        std::vector<Mask> masks;
        for (const auto& f : faces) {
            const int r = o.expansion_radius.value_or(expansion_radius_for(f.bbox, o.expansion_fraction));
            masks.push_back(expand_face_mask(registry().get<backends::HumanParser>()->face_mask(img, f.bbox), r));
        }
        return union_of(masks, img.width, img.height);
    }

    static inline pgtest::TempDir* dir_ = nullptr;
    static inline generation::IdentityProfile* alice_ = nullptr;
    static inline generation::IdentityProfile* bob_ = nullptr;
};

TEST_F(InpaintTest, Stage1RetriesRejectedSeeds) {
    const auto tmpl = group();
    const auto pose = registry().get<backends::PoseEstimator>()->estimate(tmpl, PoseKind::bone);
    const auto weights = base();
    const auto ok = stage1_generate_face(pose, *alice_, weights, registry(), 100, "a handsome man");
    EXPECT_EQ(ok.attempts, 1);
    EXPECT_EQ(ok.seed, 100u);

    const auto flaky = backends::BackendRegistry::from_manifest_file(
        pgtest::write_stub_manifest(dir_->path() / "flaky.json", "100"));
    const auto retried = stage1_generate_face(pose, *alice_, weights, flaky, 100, "a handsome man");
    EXPECT_EQ(retried.attempts, 2);
    EXPECT_EQ(retried.seed, 101u);

    const auto dead = backends::BackendRegistry::from_manifest_file(
        pgtest::write_stub_manifest(dir_->path() / "dead.json", "100,101,102"));
    EXPECT_EQ(code_of([&] { stage1_generate_face(pose, *alice_, weights, dead, 100, "p"); }),
              ErrorCode::stage1_failure);
    EXPECT_EQ(code_of([&] { stage1_generate_face(pose, *alice_, weights, registry(), 100, "p", 0); }),
              ErrorCode::invalid_input);
}

TEST_F(InpaintTest, Stage2LeavesOutsideOfMaskBitExact) {
    const auto tmpl = group(1);
    const auto face = registry().get<backends::FaceDetector>()->detect(tmpl).at(0);
    Mask mask = make_mask(tmpl.width, tmpl.height);
    fill_ellipse(mask, face.bbox);
    const backends::GenerationParams params{"p", "", 3};
    const auto r = stage2_inpaint(tmpl, *face.landmarks68, mask, *alice_, base(), registry(), params);
    EXPECT_EQ(r.control_kinds, (std::vector<std::string>{"pose", "canny"}));
    EXPECT_DOUBLE_EQ(r.strength, 0.65);
    bool changed_inside = false;
    for (int y = 0; y < tmpl.height; ++y)
        for (int x = 0; x < tmpl.width; ++x)
            for (int c = 0; c < 3; ++c) {
                if (!mask.at(x, y)) {
                    ASSERT_EQ(r.portrait.at(x, y, c), tmpl.at(x, y, c));
                } else {
                    changed_inside = changed_inside || r.portrait.at(x, y, c) != tmpl.at(x, y, c);
                }
            }
    EXPECT_TRUE(changed_inside);

    const auto zero = stage2_inpaint(tmpl, *face.landmarks68, mask, *alice_, base(), registry(), params, 0.0);
    EXPECT_TRUE(zero.portrait.same_pixels(tmpl));
    EXPECT_EQ(code_of([&] {
                  stage2_inpaint(tmpl, *face.landmarks68, make_mask(tmpl.width, tmpl.height), *alice_, base(),
                                 registry(), params);
              }),
              ErrorCode::invalid_input);
}

TEST_F(InpaintTest, SingleIdentityDefaultsAndDeterminism) {
    const auto tmpl = group(1);
    const auto a = inpaint_portrait(tmpl, *alice_, base(), registry(), {}, fixed_clock(kFixed));
    const auto b = inpaint_portrait(tmpl, *alice_, base(), registry(), {}, fixed_clock(kFixed));
    EXPECT_EQ(a.manifest.dump(), b.manifest.dump());
    EXPECT_EQ(a.manifest["strength"], 0.65);
    EXPECT_EQ(a.manifest["face_weight"], 0.25);
    ASSERT_EQ(a.faces.size(), 1u);
    EXPECT_EQ(a.faces[0].identity, alice_->id);
    EXPECT_FALSE(a.image.same_pixels(tmpl));
}

TEST_F(InpaintTest, CompensationRestoresBackgroundExactly) {
    const auto tmpl = group();
    const auto faces = assign(tmpl);
    InpaintOptions on;
    InpaintOptions off;
    off.compensate = false;
    const auto with = multi_id_inpaint(tmpl, faces, base(), registry(), on);
    const auto without = multi_id_inpaint(tmpl, faces, base(), registry(), off);
    const Mask inside = faces_mask(tmpl, faces, on);

    std::size_t with_diff = 0, without_diff = 0;
    for (int y = 0; y < tmpl.height; ++y)
        for (int x = 0; x < tmpl.width; ++x) {
            if (inside.at(x, y)) continue;
            for (int c = 0; c < 3; ++c) {
                with_diff += with.image.at(x, y, c) != tmpl.at(x, y, c);
                without_diff += without.image.at(x, y, c) != tmpl.at(x, y, c);
            }
        }
    EXPECT_EQ(with_diff, 0u);
    EXPECT_GT(without_diff, 0u);
    EXPECT_EQ(with.manifest["compensation"], true);
    EXPECT_EQ(without.manifest["compensation"], false);
    EXPECT_EQ(with.manifest["mode"], "multi");
}

TEST_F(InpaintTest, FaceOrderDoesNotMatter) {
    const auto tmpl = group();
    auto faces = assign(tmpl);
    const auto forward = multi_id_inpaint(tmpl, faces, base(), registry());
    std::reverse(faces.begin(), faces.end());
    const auto backward = multi_id_inpaint(tmpl, faces, base(), registry());
    EXPECT_TRUE(forward.image.same_pixels(backward.image));
    EXPECT_EQ(forward.faces[0].identity, alice_->id);
    EXPECT_EQ(backward.faces[0].identity, bob_->id);
}

TEST_F(InpaintTest, OverlappingMasksAreRejected) {
    const auto tmpl = group();
    const auto faces = assign(tmpl);
    InpaintOptions wide;
    wide.expansion_radius = 80;
    EXPECT_EQ(code_of([&] { multi_id_inpaint(tmpl, faces, base(), registry(), wide); }), ErrorCode::overlap);
    std::vector<FaceAssignment> none;
    EXPECT_EQ(code_of([&] { multi_id_inpaint(tmpl, none, base(), registry()); }), ErrorCode::invalid_input);
    InpaintOptions bad;
    bad.strength = 1.5;
    EXPECT_EQ(code_of([&] { multi_id_inpaint(tmpl, faces, base(), registry(), bad); }), ErrorCode::invalid_input);
}

TEST_F(InpaintTest, ProtectedPixelsNeverChange) {
    const auto tmpl = group(1);
    Mask protect = make_mask(tmpl.width, tmpl.height);
    fill_rect(protect, {0, 80, tmpl.width, 100});
    InpaintOptions o;
    o.protect = protect;
    const auto r = inpaint_portrait(tmpl, *alice_, base(), registry(), o);
    for (int y = 80; y < 100; ++y)
        for (int x = 0; x < tmpl.width; ++x)
            for (int c = 0; c < 3; ++c) ASSERT_EQ(r.image.at(x, y, c), tmpl.at(x, y, c));
}

TEST(ReconstructionError, MatchesQuantizer) {
    const auto reg = backends::BackendRegistry::with_stubs();
    Image img(2, 1, 1);
    img.at(0, 0) = 7;
    img.at(1, 0) = 8;
    EXPECT_EQ(reconstruction_error(img, *reg.get<backends::Autoencoder>()), (std::vector<int>{3, 0}));
}
