#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "portraitgen/geometry.h"
#include "portraitgen/image.h"

namespace pgtest {

namespace fs = std::filesystem;
using portraitgen::CropRect;
using portraitgen::Image;
using portraitgen::LandmarkSet5;
using portraitgen::LandmarkSet68;
using portraitgen::Mask;
using portraitgen::Point2;

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag = "pgtest");
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const fs::path& path() const { return path_; }
    fs::path operator/(const std::string& name) const { return path_ / name; }

private:
    fs::path path_;
};

/// Face placement in pixel coordinates. eye_distance is the distance between
/// the eye landmarks; roll rotates the face about its center (Affine2::rotation).
struct FaceSpec {
    Point2 center{128.0, 128.0};
    double eye_distance = 24.0;
    double roll = 0.0;
};

LandmarkSet5 face_landmarks5(const FaceSpec& face);
/// Synthetic 68-point layout (jaw, brows, nose, eyes, mouth) consistent with face_landmarks5.
LandmarkSet68 face_landmarks68(const FaceSpec& face);
/// The stub detector's box for a face: square of twice the 5-point extent.
CropRect face_box(const FaceSpec& face);

/// Deterministic textured RGB image with a skin-toned ellipse per face.
Image pattern_image(int width, int height, std::uint64_t seed, const std::vector<FaceSpec>& faces = {});

struct PortraitSpec {
    std::string name = "portrait";
    int width = 256;
    int height = 256;
    std::uint64_t seed = 1;
    std::vector<FaceSpec> faces{FaceSpec{}};
    bool landmarks = true;    // .lm5 (+ .lm68)
    bool landmarks68 = true;
    /// Stored image is the upright one rotated by this many quarter turns
    /// (rotate_right_angle, 90 degrees each); .rot is written to undo it.
    int stored_quarter_turns = 0;
    bool write_rot = false;
    std::vector<std::string> tags{"smile", "blue eyes", "earrings"};
    std::array<double, 2> gender{0.8, 0.2};
    std::vector<double> age{0.0, 0.0, 0.0, 0.7, 0.3, 0.0, 0.0, 0.0, 0.0};
    bool attributes = true;
    bool pose = true;
    bool hands = false;
    bool depth = false;
    std::optional<Mask> body;  // written as <name>.body.png
};

/// Writes <dir>/<name>.png and its sidecars. Returns the PNG path.
fs::path write_portrait(const fs::path& dir, const PortraitSpec& spec);

/// Bone-pose points for a face: head, neck, shoulders, elbows, hips.
std::vector<Point2> body_pose_points(const FaceSpec& face, int width, int height);
/// 21 hand keypoints around `wrist`.
std::vector<Point2> hand_points(Point2 wrist, double size);

/// `count` single-face portraits with varied placement, roll and content.
std::vector<fs::path> write_training_set(const fs::path& dir, int count, std::uint64_t seed = 7);

/// Try-on template: one face, bone+hand pose, depth, body mask; the garment
/// mask (torso rectangle) is written to <name>.garment.png and returned.
struct TryOnFixture {
    fs::path image;
    fs::path garment_mask;
    Mask garment;
};
TryOnFixture write_tryon_fixture(const fs::path& dir, const std::string& name = "tryon", bool hands = true);

/// Wide template with two disjoint faces, landmarks and pose.
fs::path write_group_fixture(const fs::path& dir, const std::string& name = "group", int faces = 2);

/// A backend manifest with every stub role; `detector_config` is merged into
/// the face detector's config and `autoencoder_quantum` sets the stub loss.
fs::path write_stub_manifest(const fs::path& path, const std::string& fail_seeds = "", int autoencoder_quantum = 4);

struct FixtureFile {
    std::string filename;
    std::vector<std::uint8_t> bytes;
};
/// The PNG plus every sidecar sharing its stem ("<stem>.*"), sorted by filename.
std::vector<FixtureFile> fixture_files(const fs::path& png);

/// 16-bit mono PCM WAV with `samples` of a sine tone.
std::vector<std::uint8_t> make_wav(int sample_rate, std::size_t samples, int channels = 1);

}  // namespace pgtest
