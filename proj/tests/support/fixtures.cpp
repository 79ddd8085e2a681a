#include "fixtures.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <numbers>

#include <nlohmann/json.hpp>
#include <unistd.h>

#include "portraitgen/backends.h"
#include "portraitgen/digest.h"
#include "portraitgen/face_normalization.h"
#include "portraitgen/stub_backends.h"

namespace pgtest {

using namespace portraitgen;

namespace {

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
}

// 5-point extent center of the alignment template; FaceSpec::center maps here.
Point2 template_anchor() {
    const auto& t = face::standard_face_template();
    double x0 = t[0].x, x1 = t[0].x, y0 = t[0].y, y1 = t[0].y;
    for (const auto& p : t) {
        x0 = std::min(x0, p.x);
        x1 = std::max(x1, p.x);
        y0 = std::min(y0, p.y);
        y1 = std::max(y1, p.y);
    }
    return {0.5 * (x0 + x1), 0.5 * (y0 + y1)};
}

double template_eye_distance() {
    const auto& t = face::standard_face_template();
    return std::hypot(t[1].x - t[0].x, t[1].y - t[0].y);
}

Point2 place(const FaceSpec& face, Point2 p) {
    const Point2 a = template_anchor();
    const double s = face.eye_distance / template_eye_distance();
    const double c = std::cos(face.roll), sn = std::sin(face.roll);
    const double dx = s * (p.x - a.x), dy = s * (p.y - a.y);
    return {face.center.x + c * dx - sn * dy, face.center.y + sn * dx + c * dy};
}

Point2 clamp_to(Point2 p, int w, int h) {
    return {std::clamp(p.x, 0.0, w - 1.0), std::clamp(p.y, 0.0, h - 1.0)};
}

}  // namespace

TempDir::TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            (tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter.fetch_add(1)));
    fs::remove_all(path_);
    fs::create_directories(path_);
}

TempDir::~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
}

LandmarkSet5 face_landmarks5(const FaceSpec& face) {
    LandmarkSet5 out;
    const auto& t = face::standard_face_template();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = place(face, t[i]);
    return out;
}

LandmarkSet68 face_landmarks68(const FaceSpec& face) {
    using std::numbers::pi;
    const auto& t = face::standard_face_template();
    std::vector<Point2> p;
    for (int i = 0; i <= 16; ++i) {  // jaw
        const double a = pi * i / 16.0;
        p.push_back({56.0 - 40.0 * std::cos(a), 60.0 + 45.0 * std::sin(a)});
    }
    for (int b = 0; b < 2; ++b) {  // brows
        const double x0 = b == 0 ? 24.0 : 62.0;
        for (int i = 0; i < 5; ++i) p.push_back({x0 + 6.5 * i, 40.0 - 4.0 * std::sin(pi * i / 4.0)});
    }
    for (int i = 0; i < 4; ++i) p.push_back({56.0, 52.0 + 5.0 * i});         // nose bridge
    for (int i = 0; i < 5; ++i) p.push_back({48.0 + 4.0 * i, 76.0 + (i == 2 ? 1.5 : 0.0)});  // nostrils
    for (int e = 0; e < 2; ++e) {  // eyes
        const Point2 c = t[static_cast<std::size_t>(e)];
        for (int i = 0; i < 6; ++i) {
            const double a = pi + 2.0 * pi * i / 6.0;
            p.push_back({c.x + 7.0 * std::cos(a), c.y + 3.0 * std::sin(a)});
        }
    }
    const Point2 mouth{0.5 * (t[3].x + t[4].x), 0.5 * (t[3].y + t[4].y)};
    for (int i = 0; i < 12; ++i) {
        const double a = pi + 2.0 * pi * i / 12.0;
        p.push_back({mouth.x + 15.0 * std::cos(a), mouth.y + 6.0 * std::sin(a)});
    }
    for (int i = 0; i < 8; ++i) {
        const double a = pi + 2.0 * pi * i / 8.0;
        p.push_back({mouth.x + 9.0 * std::cos(a), mouth.y + 3.0 * std::sin(a)});
    }
    LandmarkSet68 out;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = place(face, p[i]);
    return out;
}

CropRect face_box(const FaceSpec& face) { return backends::face_box_from_landmarks(face_landmarks5(face)); }

Image pattern_image(int width, int height, std::uint64_t seed, const std::vector<FaceSpec>& faces) {
    Image img(width, height, 3);
    const auto k = splitmix64(seed);
    const double base[3] = {60.0 + (k % 80), 70.0 + ((k >> 8) % 80), 80.0 + ((k >> 16) % 80)};
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            for (int c = 0; c < 3; ++c) {
                const auto n = splitmix64(k ^ (static_cast<std::uint64_t>(x) << 24) ^
                                          (static_cast<std::uint64_t>(y) << 4) ^ static_cast<std::uint64_t>(c));
                const double v = base[c] + 60.0 * x / std::max(1, width - 1) - 30.0 * y / std::max(1, height - 1) +
                                 static_cast<double>(n % 17) - 8.0;
                img.at(x, y, c) = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
            }
        }
    }
    for (const auto& f : faces) {
        const auto box = face_box(f);
        const double rx = 0.42 * box.width(), ry = 0.5 * box.height();
        const auto lm = face_landmarks5(f);
        for (int y = 0; y < height; ++y) {
            for (int x = 0; x < width; ++x) {
                const double dx = (x - f.center.x) / rx, dy = (y - f.center.y) / ry;
                if (dx * dx + dy * dy > 1.0) continue;
                const std::uint8_t skin[3] = {214, 170, 140};
                for (int c = 0; c < 3; ++c) {
                    img.at(x, y, c) = static_cast<std::uint8_t>(skin[c] - static_cast<int>(20.0 * dy) +
                                                                static_cast<int>((seed * (c + 3)) % 11));
                }
                for (std::size_t i = 0; i < lm.size(); ++i) {
                    if (std::hypot(x - lm[i].x, y - lm[i].y) < 0.08 * f.eye_distance + 1.0) {
                        for (int c = 0; c < 3; ++c) img.at(x, y, c) = i < 2 ? 40 : (i == 2 ? 150 : 120);
                    }
                }
            }
        }
    }
    return img;
}

std::vector<Point2> body_pose_points(const FaceSpec& face, int width, int height) {
    const double s = 2.2 * face.eye_distance;
    const Point2 c = face.center;
    const std::vector<Point2> raw{
        c,                                    // head
        {c.x, c.y + 0.9 * s},                 // neck
        {c.x - 0.9 * s, c.y + 1.0 * s},       // shoulders
        {c.x + 0.9 * s, c.y + 1.0 * s},
        {c.x - 1.1 * s, c.y + 1.8 * s},       // elbows
        {c.x + 1.1 * s, c.y + 1.8 * s},
        {c.x - 0.5 * s, c.y + 2.6 * s},       // hips
        {c.x + 0.5 * s, c.y + 2.6 * s},
    };
    std::vector<Point2> out;
    for (const auto& p : raw) out.push_back(clamp_to(p, width, height));
    return out;
}

std::vector<Point2> hand_points(Point2 wrist, double size) {
    std::vector<Point2> out{wrist};
    for (int finger = 0; finger < 5; ++finger) {
        const double a = -std::numbers::pi / 2.0 + (finger - 2) * 0.3;
        for (int j = 1; j <= 4; ++j) {
            out.push_back({wrist.x + size * 0.25 * j * std::cos(a), wrist.y + size * 0.25 * j * std::sin(a)});
        }
    }
    return out;
}

fs::path write_portrait(const fs::path& dir, const PortraitSpec& spec) {
    fs::create_directories(dir);
    const fs::path stem = dir / spec.name;
    Image upright = pattern_image(spec.width, spec.height, spec.seed, spec.faces);

    const int degrees = 90 * (((spec.stored_quarter_turns % 4) + 4) % 4);
    const Affine2 t = face::right_angle_transform(degrees, spec.width, spec.height);
    const Image stored = face::rotate_right_angle(upright, degrees);
    const auto map_all = [&](std::span<const Point2> pts) {
        std::vector<Point2> out;
        for (const auto& p : pts) out.push_back(t.apply(p));
        return out;
    };

    save_png(stored, fs::path(stem.string() + ".png"));
    if (spec.landmarks) {
        std::string lm5, lm68;
        for (const auto& f : spec.faces) {
            const auto a = face_landmarks5(f);
            lm5 += format_points(map_all(a));
            const auto b = face_landmarks68(f);
            lm68 += format_points(map_all(b));
        }
        write_text(stem.string() + ".lm5", lm5);
        if (spec.landmarks68) write_text(stem.string() + ".lm68", lm68);
    }
    if (spec.write_rot || degrees != 0) {
        // Probability mass on the quarter turn that undoes the stored rotation.
        std::array<double, 4> rot{0.04, 0.04, 0.04, 0.04};
        rot[static_cast<std::size_t>((4 - degrees / 90) % 4)] = 0.88;
        write_text(stem.string() + ".rot",
                   std::to_string(rot[0]) + " " + std::to_string(rot[1]) + " " + std::to_string(rot[2]) + " " +
                       std::to_string(rot[3]) + "\n");
    }
    if (!spec.tags.empty()) {
        std::string text;
        for (const auto& tag : spec.tags) text += tag + "\n";
        write_text(stem.string() + ".tags", text);
    }
    if (spec.attributes) {
        std::string text = std::to_string(spec.gender[0]) + " " + std::to_string(spec.gender[1]) + "\n";
        for (std::size_t i = 0; i < spec.age.size(); ++i) text += (i ? " " : "") + std::to_string(spec.age[i]);
        write_text(stem.string() + ".attr", text + "\n");
    }
    if (spec.pose && !spec.faces.empty()) {
        std::vector<Point2> pts;
        for (const auto& f : spec.faces) {
            const auto b = body_pose_points(f, spec.width, spec.height);
            pts.insert(pts.end(), b.begin(), b.end());
        }
        write_text(stem.string() + ".pose", format_points(map_all(pts)));
        if (spec.hands) {
            const auto& f = spec.faces.front();
            const auto body = body_pose_points(f, spec.width, spec.height);
            auto hands = hand_points(clamp_to({body[4].x, body[4].y + 0.8 * f.eye_distance}, spec.width, spec.height),
                                     f.eye_distance);
            const auto right = hand_points(
                clamp_to({body[5].x, body[5].y + 0.8 * f.eye_distance}, spec.width, spec.height), f.eye_distance);
            hands.insert(hands.end(), right.begin(), right.end());
            for (auto& p : hands) p = clamp_to(p, spec.width, spec.height);
            write_text(stem.string() + ".hand", format_points(map_all(hands)));
        }
    }
    if (spec.depth) write_text(stem.string() + ".depth", "depth fixture " + spec.name + "\n");
    if (spec.body) save_png(*spec.body, fs::path(stem.string() + ".body.png"));
    return fs::path(stem.string() + ".png");
}

std::vector<fs::path> write_training_set(const fs::path& dir, int count, std::uint64_t seed) {
    std::vector<fs::path> out;
    for (int i = 0; i < count; ++i) {
        PortraitSpec spec;
        spec.name = "photo-" + std::to_string(i);
        spec.seed = seed * 1000 + static_cast<std::uint64_t>(i);
        spec.faces = {FaceSpec{{128.0 + 10.0 * ((i % 3) - 1), 120.0 + 8.0 * (i % 2)},
                               22.0 + 2.0 * (i % 3), 0.12 * ((i % 3) - 1)}};
        out.push_back(write_portrait(dir, spec));
    }
    return out;
}

TryOnFixture write_tryon_fixture(const fs::path& dir, const std::string& name, bool hands) {
    PortraitSpec spec;
    spec.name = name;
    spec.seed = 4242;
    spec.faces = {FaceSpec{{128.0, 64.0}, 20.0, 0.0}};
    spec.hands = hands;
    spec.depth = true;
    Mask body = make_mask(spec.width, spec.height);
    fill_ellipse(body, {40, 24, 216, 300});
    spec.body = body;
    TryOnFixture fx;
    fx.image = write_portrait(dir, spec);
    fx.garment = make_mask(spec.width, spec.height);
    fill_rect(fx.garment, {84, 120, 172, 232});
    fx.garment_mask = dir / (name + ".garment.png");
    save_png(fx.garment, fx.garment_mask);
    return fx;
}

fs::path write_group_fixture(const fs::path& dir, const std::string& name, int faces) {
    PortraitSpec spec;
    spec.name = name;
    spec.seed = 777;
    spec.width = 128 * faces;
    spec.height = 192;
    spec.faces.clear();
    for (int i = 0; i < faces; ++i) {
        spec.faces.push_back(FaceSpec{{64.0 + 128.0 * i, 84.0}, 18.0 + 2.0 * i, 0.05 * (i % 2 ? -1 : 1)});
    }
    return write_portrait(dir, spec);
}

fs::path write_stub_manifest(const fs::path& path, const std::string& fail_seeds, int autoencoder_quantum) {
    auto registry = backends::BackendRegistry::with_stubs();
    nlohmann::json manifest = registry.to_manifest();
    for (auto& d : manifest) {
        if (d.at("role") == "face-detector" && !fail_seeds.empty()) d["config"]["fail_seeds"] = fail_seeds;
        if (d.at("role") == "autoencoder") d["config"]["quantum"] = std::to_string(autoencoder_quantum);
    }
    fs::create_directories(path.parent_path());
    write_text(path, manifest.dump(2));
    return path;
}

std::vector<std::uint8_t> make_wav(int sample_rate, std::size_t samples, int channels) {
    std::vector<std::uint8_t> out;
    const auto put = [&](std::uint32_t v, int bytes) {
        for (int i = 0; i < bytes; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    };
    const auto data_bytes = static_cast<std::uint32_t>(samples * channels * 2);
    out.insert(out.end(), {'R', 'I', 'F', 'F'});
    put(36 + data_bytes, 4);
    out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
    put(16, 4);
    put(1, 2);
    put(static_cast<std::uint32_t>(channels), 2);
    put(static_cast<std::uint32_t>(sample_rate), 4);
    put(static_cast<std::uint32_t>(sample_rate * channels * 2), 4);
    put(static_cast<std::uint32_t>(channels * 2), 2);
    put(16, 2);
    out.insert(out.end(), {'d', 'a', 't', 'a'});
    put(data_bytes, 4);
    for (std::size_t i = 0; i < samples; ++i) {
        const auto v = static_cast<std::int16_t>(std::lround(6000.0 * std::sin(2.0 * std::numbers::pi * 220.0 * i / sample_rate)));
        for (int c = 0; c < channels; ++c) put(static_cast<std::uint16_t>(v), 2);
    }
    return out;
}

std::vector<FixtureFile> fixture_files(const fs::path& png) {
    const std::string prefix = png.stem().string() + ".";
    std::vector<FixtureFile> out;
    for (const auto& entry : fs::directory_iterator(png.parent_path())) {
        const auto name = entry.path().filename().string();
        if (!entry.is_regular_file() || name.rfind(prefix, 0) != 0) continue;
        std::ifstream in(entry.path(), std::ios::binary);
        out.push_back({name, {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()}});
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.filename < b.filename; });
    return out;
}

}  // namespace pgtest
