#include "portraitgen/stub_backends.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "portraitgen/digest.h"
#include "portraitgen/error.h"

namespace portraitgen::backends {

namespace {

std::string config_or(const BackendDescriptor& d, const std::string& key, const std::string& fallback) {
    const auto it = d.config.find(key);
    return it == d.config.end() ? fallback : it->second;
}

double config_number(const BackendDescriptor& d, const std::string& key, double fallback) {
    const auto it = d.config.find(key);
    if (it == d.config.end()) {
        return fallback;
    }
    try {
        return std::stod(it->second);
    } catch (const std::exception&) {
        throw Error(ErrorCode::invalid_config, "backend " + d.id + " config " + key + " is not a number");
    }
}

std::vector<double> parse_numbers(const std::string& line) {
    std::istringstream in(line);
    std::vector<double> out;
    double v = 0.0;
    while (in >> v) {
        out.push_back(v);
    }
    return out;
}

std::vector<std::string> lines_of(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        const auto first = line.find_first_not_of(" \t");
        if (first == std::string::npos || line[first] == '#') {
            continue;
        }
        out.push_back(line);
    }
    return out;
}

std::string require_sidecar(const Image& image, std::string_view extension) {
    auto text = read_sidecar(image.provenance, extension);
    if (!text) {
        throw Error(ErrorCode::fixture_missing,
                    "missing fixture " + image.provenance.source + std::string(extension));
    }
    return *text;
}

bool inside(const Image& image, Point2 p) {
    return p.x >= 0.0 && p.y >= 0.0 && p.x <= image.width - 1 && p.y <= image.height - 1;
}

CropRect hull(std::span<const Point2> pts) {
    double x0 = pts[0].x, x1 = pts[0].x, y0 = pts[0].y, y1 = pts[0].y;
    for (const auto& p : pts) {
        x0 = std::min(x0, p.x);
        x1 = std::max(x1, p.x);
        y0 = std::min(y0, p.y);
        y1 = std::max(y1, p.y);
    }
    return {static_cast<int>(std::floor(x0)), static_cast<int>(std::floor(y0)), static_cast<int>(std::ceil(x1)),
            static_cast<int>(std::ceil(y1))};
}

CropRect clip(const CropRect& r, int w, int h) {
    return {std::clamp(r.left, 0, w), std::clamp(r.top, 0, h), std::clamp(r.right, 0, w), std::clamp(r.bottom, 0, h)};
}

// Smooth, seed-dependent RGB pattern: two-color gradient, a soft blob and fine noise.
std::uint8_t synth_pixel(std::uint64_t key, int x, int y, int c, int w, int h) {
    std::uint64_t s = splitmix64(key);
    double base[3], tint[3];
    for (int i = 0; i < 3; ++i) {
        s = splitmix64(s);
        base[i] = 40.0 + 150.0 * unit_interval(s);
        s = splitmix64(s);
        tint[i] = -60.0 + 120.0 * unit_interval(s);
    }
    s = splitmix64(s);
    const double angle = 2.0 * std::numbers::pi * unit_interval(s);
    s = splitmix64(s);
    const double bx = 0.25 + 0.5 * unit_interval(s);
    s = splitmix64(s);
    const double by = 0.25 + 0.5 * unit_interval(s);
    s = splitmix64(s);
    const double radius = 0.15 + 0.25 * unit_interval(s);
    const double u = static_cast<double>(x) / std::max(1, w - 1);
    const double v = static_cast<double>(y) / std::max(1, h - 1);
    const double grad = std::cos(angle) * (u - 0.5) + std::sin(angle) * (v - 0.5);
    const double d2 = ((u - bx) * (u - bx) + (v - by) * (v - by)) / (radius * radius);
    const double blob = std::exp(-d2);
    const auto noise = splitmix64(key ^ (static_cast<std::uint64_t>(x) << 32) ^ (static_cast<std::uint64_t>(y) << 8) ^
                                  static_cast<std::uint64_t>(c));
    const double value = base[c % 3] + 80.0 * grad + tint[c % 3] * blob + static_cast<double>(noise % 9) - 4.0;
    return static_cast<std::uint8_t>(std::clamp(std::lround(value), 0L, 255L));
}

std::uint64_t generation_key(const lora::ModelWeights& weights, const GenerationParams& params,
                             const ControlStack* controls) {
    Digest d;
    d.update("stub-generation/v1");
    d.update(params.prompt).update(params.negative_prompt).update_value(params.seed);
    d.update(lora::weights_digest(weights));
    d.update(controls != nullptr ? controls->digest() : std::string("no-controls"));
    return d.value();
}

}  // namespace

std::optional<std::string> read_sidecar(const Provenance& provenance, std::string_view extension) {
    if (provenance.source.empty()) {
        return std::nullopt;
    }
    std::ifstream in(provenance.source + std::string(extension), std::ios::binary);
    if (!in) {
        return std::nullopt;
    }
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

std::size_t utf8_length(std::string_view text) {
    return static_cast<std::size_t>(
        std::count_if(text.begin(), text.end(), [](char ch) { return (static_cast<unsigned char>(ch) & 0xC0) != 0x80; }));
}

// ---- detector ---------------------------------------------------------------

CropRect face_box_from_landmarks(const LandmarkSet5& landmarks) {
    double x0 = landmarks[0].x, x1 = x0, y0 = landmarks[0].y, y1 = y0;
    for (const auto& p : landmarks) {
        x0 = std::min(x0, p.x);
        x1 = std::max(x1, p.x);
        y0 = std::min(y0, p.y);
        y1 = std::max(y1, p.y);
    }
    const double side = 2.0 * std::max(x1 - x0, y1 - y0);
    const double cx = 0.5 * (x0 + x1);
    const double cy = 0.5 * (y0 + y1);
    const int left = static_cast<int>(std::lround(cx - 0.5 * side));
    const int top = static_cast<int>(std::lround(cy - 0.5 * side));
    const int s = static_cast<int>(std::lround(side));
    return {left, top, left + s, top + s};
}

StubFaceDetector::StubFaceDetector(BackendDescriptor descriptor) : FaceDetector(std::move(descriptor)) {
    for (double v : parse_numbers([&] {
             auto s = config_or(this->descriptor(), "fail_seeds", "");
             std::replace(s.begin(), s.end(), ',', ' ');
             return s;
         }())) {
        fail_seeds_.insert(static_cast<std::uint64_t>(v));
    }
}

std::vector<FaceDetection> StubFaceDetector::detect(const Image& image) const {
    require_valid(image, "image");
    const auto& prov = image.provenance;
    if (prov.seed && fail_seeds_.contains(*prov.seed)) {
        throw Error(ErrorCode::no_face, "detector configured to miss seed " + std::to_string(*prov.seed));
    }
    const auto lm5_text = read_sidecar(prov, ".lm5");
    if (!lm5_text) {
        throw Error(ErrorCode::no_face, "no landmark fixture for " +
                                            (prov.source.empty() ? std::string("<generated image>") : prov.source));
    }
    const auto pts5 = parse_points(*lm5_text);
    if (pts5.empty()) {
        throw Error(ErrorCode::no_face, "landmark fixture lists no faces: " + prov.source);
    }
    if (pts5.size() % kLandmarks5 != 0) {
        throw Error(ErrorCode::invalid_input, "landmark fixture must hold 5 points per face: " + prov.source);
    }
    std::vector<Point2> pts68;
    if (const auto lm68_text = read_sidecar(prov, ".lm68")) {
        pts68 = parse_points(*lm68_text);
        if (pts68.size() % kLandmarks68 != 0) {
            throw Error(ErrorCode::invalid_input, "68-point fixture must hold 68 points per face: " + prov.source);
        }
    }
    std::vector<CropRect> boxes;
    if (const auto bbox_text = read_sidecar(prov, ".bbox")) {
        for (const auto& line : lines_of(*bbox_text)) {
            const auto v = parse_numbers(line);
            if (v.size() != 4) {
                throw Error(ErrorCode::invalid_input, "bbox fixture lines must be 'left top right bottom'");
            }
            const std::array<Point2, 4> corners{{{v[0], v[1]}, {v[2], v[1]}, {v[0], v[3]}, {v[2], v[3]}}};
            std::array<Point2, 4> mapped;
            for (std::size_t i = 0; i < 4; ++i) mapped[i] = prov.transform.apply(corners[i]);
            boxes.push_back(hull(mapped));
        }
    }

    std::vector<FaceDetection> faces;
    const std::size_t count = pts5.size() / kLandmarks5;
    for (std::size_t f = 0; f < count; ++f) {
        FaceDetection det;
        bool visible = true;
        for (std::size_t i = 0; i < kLandmarks5; ++i) {
            det.landmarks[i] = prov.transform.apply(pts5[f * kLandmarks5 + i]);
            visible = visible && inside(image, det.landmarks[i]);
        }
        if (!visible) {
            continue;
        }
        if (pts68.size() >= (f + 1) * kLandmarks68) {
            LandmarkSet68 lm;
            for (std::size_t i = 0; i < kLandmarks68; ++i) lm[i] = prov.transform.apply(pts68[f * kLandmarks68 + i]);
            det.landmarks68 = lm;
        }
        det.bbox = clip(f < boxes.size() ? boxes[f] : face_box_from_landmarks(det.landmarks), image.width, image.height);
        if (det.bbox.empty()) {
            continue;
        }
        faces.push_back(det);
    }
    if (faces.empty()) {
        throw Error(ErrorCode::no_face, "every fixture face lies outside the image: " + prov.source);
    }
    return faces;
}

// ---- simple fixture readers -------------------------------------------------

std::array<double, 4> StubRotationClassifier::predict(const Image& image) const {
    require_valid(image, "image");
    const auto text = read_sidecar(image.provenance, ".rot");
    if (!text) {
        return {1.0, 0.0, 0.0, 0.0};
    }
    const auto v = parse_numbers(*text);
    if (v.size() != 4) {
        throw Error(ErrorCode::invalid_input, "rotation fixture must hold 4 probabilities");
    }
    // The fixture describes the source asset; quarter turns already applied to
    // this image shift which remaining rotation makes it upright.
    const auto& t = image.provenance.transform;
    const double turns = -std::atan2(t.m[3], t.m[0]) / (0.5 * std::numbers::pi);
    const auto applied = static_cast<std::size_t>(((std::lround(turns) % 4) + 4) % 4);
    std::array<double, 4> probs{};
    for (std::size_t r = 0; r < 4; ++r) {
        probs[r] = v[(r + applied) % 4];
    }
    return probs;
}

Mask StubHumanParser::head_mask(const Image& image, const CropRect& face) const {
    Mask m = make_mask(image.width, image.height);
    const auto c = face.center();
    const double hw = 0.65 * face.width();
    const double hh = 0.65 * face.height();
    fill_ellipse(m, {static_cast<int>(std::lround(c.x - hw)), static_cast<int>(std::lround(c.y - hh)),
                     static_cast<int>(std::lround(c.x + hw)), static_cast<int>(std::lround(c.y + hh))});
    return m;
}

Mask StubHumanParser::face_mask(const Image& image, const CropRect& face) const {
    Mask m = make_mask(image.width, image.height);
    fill_ellipse(m, face);
    return m;
}

Mask StubHumanParser::body_mask(const Image& image) const {
    if (!image.provenance.source.empty() && image.provenance.transform == Affine2::identity()) {
        const std::filesystem::path path = image.provenance.source + ".body.png";
        if (std::filesystem::exists(path)) {
            Mask m = to_gray(load_png(path));
            if (m.width == image.width && m.height == image.height) {
                for (auto& v : m.pixels) v = v ? 255 : 0;
                return m;
            }
        }
    }
    return Mask(image.width, image.height, 1, 255);
}

Image StubSkinRetoucher::retouch(const Image& image, const Mask& region) const {
    require_valid(image, "image");
    require_mask_for(region, image);
    Image out = image;
    for (int y = 0; y < image.height; ++y) {
        for (int x = 0; x < image.width; ++x) {
            if (!region.at(x, y)) {
                continue;
            }
            for (int c = 0; c < image.channels; ++c) {
                int sum = 0;
                int n = 0;
                for (int dy = -1; dy <= 1; ++dy) {
                    for (int dx = -1; dx <= 1; ++dx) {
                        const int xx = x + dx;
                        const int yy = y + dy;
                        if (xx >= 0 && yy >= 0 && xx < image.width && yy < image.height) {
                            sum += image.at(xx, yy, c);
                            ++n;
                        }
                    }
                }
                out.at(x, y, c) = static_cast<std::uint8_t>((sum + n / 2) / n);
            }
        }
    }
    return out;
}

std::vector<std::string> StubTagger::tag(const Image& image) const {
    const auto text = read_sidecar(image.provenance, ".tags");
    if (!text) {
        return {};
    }
    return lines_of(*text);
}

labeling::AttributePrediction StubAttributePredictor::predict(const Image& image) const {
    const auto lines = lines_of(require_sidecar(image, ".attr"));
    if (lines.size() < 2) {
        throw Error(ErrorCode::invalid_input, "attribute fixture needs gender and age lines");
    }
    labeling::AttributePrediction p;
    const auto g = parse_numbers(lines[0]);
    if (g.size() != 2) {
        throw Error(ErrorCode::invalid_input, "attribute fixture gender line needs 2 probabilities");
    }
    p.gender_probs = {g[0], g[1]};
    p.age_probs = parse_numbers(lines[1]);
    p.age_bin_edges = lines.size() >= 3 ? parse_numbers(lines[2]) : labeling::default_age_bin_edges();
    p.validate();
    return p;
}

double StubQualityAssessor::score(const Image& face_crop, const Mask& head_mask) const {
    require_mask_for(head_mask, face_crop);
    return static_cast<double>(mask_count(head_mask)) / static_cast<double>(head_mask.pixels.size());
}

std::vector<double> StubFaceEmbedder::embed(const Image& face) const {
    require_valid(face, "face");
    const Image gray = to_gray(face);
    std::vector<double> v(kDims, 0.0);
    std::vector<int> counts(kDims, 0);
    for (int y = 0; y < gray.height; ++y) {
        const int by = std::min(7, y * 8 / gray.height);
        for (int x = 0; x < gray.width; ++x) {
            const int bx = std::min(7, x * 8 / gray.width);
            v[static_cast<std::size_t>(by * 8 + bx)] += gray.at(x, y);
            ++counts[static_cast<std::size_t>(by * 8 + bx)];
        }
    }
    double mean = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        v[i] = counts[i] > 0 ? v[i] / counts[i] : 0.0;
        mean += v[i];
    }
    mean /= kDims;
    double norm = 0.0;
    for (auto& x : v) {
        x -= mean;
        norm += x * x;
    }
    norm = std::sqrt(norm);
    if (!(norm > 1e-12)) {
        std::fill(v.begin(), v.end(), 0.0);
        v[0] = 1.0;
        return v;
    }
    for (auto& x : v) x /= norm;
    return v;
}

Image StubFaceFusion::fuse(const Image& target, const Image& template_face, const Mask* region) const {
    require_valid(target, "target");
    require_valid(template_face, "template face");
    if (region != nullptr) {
        require_mask_for(*region, target);
    }
    const Image tpl = resize_nearest(template_face, target.width, target.height);
    Image out = target;
    for (int y = 0; y < target.height; ++y) {
        for (int x = 0; x < target.width; ++x) {
            if (region != nullptr && !region->at(x, y)) {
                continue;
            }
            for (int c = 0; c < target.channels; ++c) {
                const int t = tpl.at(x, y, std::min(c, tpl.channels - 1));
                out.at(x, y, c) = static_cast<std::uint8_t>((3 * target.at(x, y, c) + t + 2) / 4);
            }
        }
    }
    return out;
}

// ---- generators -------------------------------------------------------------

StubTextToImage::StubTextToImage(BackendDescriptor descriptor) : TextToImage(std::move(descriptor)) {
    width_ = static_cast<int>(config_number(this->descriptor(), "width", 128));
    height_ = static_cast<int>(config_number(this->descriptor(), "height", 128));
}

Affine2 StubTextToImage::pose_jitter(std::uint64_t seed, int width, int height) {
    const double scale = 1.0 + 0.02 * (static_cast<double>(seed % 5) - 2.0);
    const double angle = 0.02 * (static_cast<double>((seed / 5) % 3) - 1.0);
    const Point2 center{0.5 * (width - 1), 0.5 * (height - 1)};
    Affine2 s;
    s.m = {scale, 0.0, center.x * (1.0 - scale), 0.0, scale, center.y * (1.0 - scale)};
    const auto shift = Affine2::translation(static_cast<double>(seed % 3) - 1.0, static_cast<double>((seed / 3) % 3) - 1.0);
    return shift.after(Affine2::rotation(angle, center).after(s));
}

Image StubTextToImage::generate(const lora::ModelWeights& weights, const GenerationParams& params,
                                const ControlStack* controls) const {
    if (controls != nullptr) {
        controls->validate();
    }
    int w = params.width > 0 ? params.width : width_;
    int h = params.height > 0 ? params.height : height_;
    const PoseMap* pose = controls != nullptr && controls->pose ? &*controls->pose : nullptr;
    if (pose != nullptr && pose->width > 0 && pose->height > 0) {
        w = pose->width;
        h = pose->height;
    }
    const auto key = generation_key(weights, params, controls);
    Image out(w, h, 3);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < 3; ++c) {
                out.at(x, y, c) = synth_pixel(key, x, y, c, w, h);
            }
        }
    }
    if (pose != nullptr) {
        out.provenance.source = pose->provenance.source;
        out.provenance.transform = pose_jitter(params.seed, w, h).after(pose->provenance.transform);
    }
    out.provenance.seed = params.seed;
    return out;
}

Image StubInpainter::inpaint(const lora::ModelWeights& weights, const Image& image, const Mask& mask,
                             const GenerationParams& params, const ControlStack& controls) const {
    require_valid(image, "image");
    require_mask_for(mask, image);
    controls.validate();
    const auto key = generation_key(weights, params, &controls);
    const double s = controls.strength;
    Image out = image;
    for (int y = 0; y < image.height; ++y) {
        for (int x = 0; x < image.width; ++x) {
            if (!mask.at(x, y)) {
                continue;
            }
            for (int c = 0; c < image.channels; ++c) {
                const double gen = synth_pixel(key, x, y, c, image.width, image.height);
                const double v = (1.0 - s) * image.at(x, y, c) + s * gen;
                out.at(x, y, c) = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
            }
        }
    }
    return out;
}

PoseMap StubPoseEstimator::estimate(const Image& image, PoseKind kind) const {
    require_valid(image, "image");
    PoseMap pose;
    pose.kind = kind;
    pose.width = image.width;
    pose.height = image.height;
    pose.provenance = image.provenance;
    for (const auto& p : parse_points(require_sidecar(image, ".pose"))) {
        pose.points.push_back(image.provenance.transform.apply(p));
    }
    if (kind == PoseKind::bone_and_hand) {
        if (const auto hand = read_sidecar(image.provenance, ".hand")) {
            for (const auto& p : parse_points(*hand)) {
                pose.hand_points.push_back(image.provenance.transform.apply(p));
            }
        }
    }
    return pose;
}

Image StubDepthEstimator::estimate(const Image& image, const Mask& region) const {
    require_valid(image, "image");
    require_mask_for(region, image);
    const auto key = Digest().update(require_sidecar(image, ".depth")).value();
    const double near = 128.0 + static_cast<double>(key % 96);
    Image depth(image.width, image.height, 1);
    for (int y = 0; y < image.height; ++y) {
        for (int x = 0; x < image.width; ++x) {
            if (region.at(x, y)) {
                depth.at(x, y) = static_cast<std::uint8_t>(std::clamp(
                    std::lround(near - 64.0 * static_cast<double>(y) / std::max(1, image.height - 1)), 1L, 255L));
            }
        }
    }
    return depth;
}

StubAutoencoder::StubAutoencoder(BackendDescriptor descriptor) : Autoencoder(std::move(descriptor)) {
    quantum_ = static_cast<int>(config_number(this->descriptor(), "quantum", 4));
    if (quantum_ < 1 || quantum_ > 128) {
        throw Error(ErrorCode::invalid_config, "autoencoder quantum must be in [1, 128]");
    }
}

Latent StubAutoencoder::encode(const Image& image) const {
    require_valid(image, "image");
    Latent latent{image};
    for (auto& v : latent.data.pixels) {
        v = static_cast<std::uint8_t>((v / quantum_) * quantum_);
    }
    return latent;
}

Image StubAutoencoder::decode(const Latent& latent) const { return latent.data; }

StubTalkingHeadDriver::StubTalkingHeadDriver(BackendDescriptor descriptor)
    : TalkingHeadDriver(std::move(descriptor)) {
    fps_ = config_number(this->descriptor(), "fps", 25.0);
}

VideoClip StubTalkingHeadDriver::drive(const Image& portrait, const Audio& audio, const TalkingHeadParams& params) const {
    require_valid(portrait, "portrait");
    VideoClip clip;
    clip.width = params.resolution;
    clip.height = params.resolution;
    clip.fps = fps_;
    clip.duration = audio.duration();
    clip.frame_count = static_cast<std::int64_t>(std::llround(clip.duration * fps_));
    Digest d;
    d.update("stub-talking-head/v1").update(image_digest(portrait));
    d.update_value(audio.sample_rate);
    for (auto s : audio.samples) d.update_value(s);
    d.update_value(params.resolution).update_value(params.pose_index);
    d.update_value(params.expression_scale).update_value(params.blink_rate);
    clip.digest = d.hex();
    return clip;
}

VideoClip StubUpscaler::upscale(const VideoClip& clip) const {
    VideoClip out = clip;
    out.width = clip.width * 2;
    out.height = clip.height * 2;
    out.digest = Digest().update("stub-upscale/v1").update(clip.digest).hex();
    return out;
}

StubTts::StubTts(BackendDescriptor descriptor) : Tts(std::move(descriptor)) {
    sample_rate_ = static_cast<int>(config_number(this->descriptor(), "sample_rate", 16000));
    seconds_per_char_ = config_number(this->descriptor(), "seconds_per_char", 0.08);
}

Audio StubTts::synthesize(const std::string& text, const std::string& voice) const {
    Audio audio;
    audio.sample_rate = sample_rate_;
    const auto chars = utf8_length(text);
    const auto per_char = static_cast<std::size_t>(std::llround(seconds_per_char_ * sample_rate_));
    audio.samples.reserve(chars * per_char);
    const auto voice_key = hash_text(voice);
    std::size_t index = 0;
    for (unsigned char ch : text) {
        if ((ch & 0xC0) == 0x80) {
            continue;
        }
        const double freq = 180.0 + static_cast<double>((ch * 7 + voice_key) % 400);
        for (std::size_t i = 0; i < per_char; ++i, ++index) {
            const double t = static_cast<double>(index) / sample_rate_;
            audio.samples.push_back(static_cast<std::int16_t>(std::lround(8000.0 * std::sin(2.0 * std::numbers::pi * freq * t))));
        }
    }
    return audio;
}

std::shared_ptr<Backend> make_stub(const BackendDescriptor& d) {
    switch (d.role) {
        case BackendRole::rotation_classifier: return std::make_shared<StubRotationClassifier>(d);
        case BackendRole::face_detector: return std::make_shared<StubFaceDetector>(d);
        case BackendRole::human_parser: return std::make_shared<StubHumanParser>(d);
        case BackendRole::skin_retoucher: return std::make_shared<StubSkinRetoucher>(d);
        case BackendRole::tagger: return std::make_shared<StubTagger>(d);
        case BackendRole::attribute_predictor: return std::make_shared<StubAttributePredictor>(d);
        case BackendRole::quality_assessor: return std::make_shared<StubQualityAssessor>(d);
        case BackendRole::face_embedder: return std::make_shared<StubFaceEmbedder>(d);
        case BackendRole::face_fusion: return std::make_shared<StubFaceFusion>(d);
        case BackendRole::text_to_image: return std::make_shared<StubTextToImage>(d);
        case BackendRole::inpainter: return std::make_shared<StubInpainter>(d);
        case BackendRole::pose_estimator: return std::make_shared<StubPoseEstimator>(d);
        case BackendRole::depth_estimator: return std::make_shared<StubDepthEstimator>(d);
        case BackendRole::autoencoder: return std::make_shared<StubAutoencoder>(d);
        case BackendRole::talking_head_driver: return std::make_shared<StubTalkingHeadDriver>(d);
        case BackendRole::upscaler: return std::make_shared<StubUpscaler>(d);
        case BackendRole::tts: return std::make_shared<StubTts>(d);
    }
    throw Error(ErrorCode::internal, "unhandled backend role");
}

}  // namespace portraitgen::backends
