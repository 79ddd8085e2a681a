#include "portraitgen/inpaint.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "portraitgen/digest.h"
#include "portraitgen/error.h"
#include "portraitgen/preprocess.h"

namespace portraitgen::inpaint {

using backends::BackendRegistry;
using backends::BackendRole;
using generation::IdentityProfile;

AffineFit compute_alignment_affine(std::span<const Point2> src, std::span<const Point2> dst) {
    if (src.size() != dst.size()) {
        throw Error(ErrorCode::invalid_input, "landmark sets differ in size");
    }
    if (src.size() < 3) {
        throw Error(ErrorCode::degenerate_landmarks, "an affine fit needs at least 3 point pairs");
    }
    require_finite(src, "source landmarks");
    require_finite(dst, "target landmarks");
    const double n = static_cast<double>(src.size());
    Point2 ms{0, 0}, md{0, 0};
    for (std::size_t i = 0; i < src.size(); ++i) {
        ms = {ms.x + src[i].x, ms.y + src[i].y};
        md = {md.x + dst[i].x, md.y + dst[i].y};
    }
    ms = {ms.x / n, ms.y / n};
    md = {md.x / n, md.y / n};

    // Normal equations of the centered problem: S_xx L^T = S_xy.
    double sxx = 0, sxy = 0, syy = 0;
    double ax = 0, ay = 0, bx = 0, by = 0;  // sum x*u, y*u, x*v, y*v
    for (std::size_t i = 0; i < src.size(); ++i) {
        const double x = src[i].x - ms.x;
        const double y = src[i].y - ms.y;
        const double u = dst[i].x - md.x;
        const double v = dst[i].y - md.y;
        sxx += x * x;
        sxy += x * y;
        syy += y * y;
        ax += x * u;
        ay += y * u;
        bx += x * v;
        by += y * v;
    }
    const double trace = sxx + syy;
    const double det = sxx * syy - sxy * sxy;
    if (!(trace > 0.0) || det <= 1e-12 * trace * trace) {
        throw Error(ErrorCode::degenerate_landmarks, "source landmarks are collinear or coincident");
    }
    const double l00 = (syy * ax - sxy * ay) / det;
    const double l01 = (sxx * ay - sxy * ax) / det;
    const double l10 = (syy * bx - sxy * by) / det;
    const double l11 = (sxx * by - sxy * bx) / det;
    AffineFit fit;
    fit.map.m = {l00, l01, md.x - l00 * ms.x - l01 * ms.y, l10, l11, md.y - l10 * ms.x - l11 * ms.y};
    if (std::abs(fit.map.determinant()) <= 1e-9) {
        throw Error(ErrorCode::degenerate_landmarks, "fitted map is singular; target landmarks are collinear");
    }
    for (std::size_t i = 0; i < src.size(); ++i) {
        const auto p = fit.map.apply(src[i]);
        fit.residual += (p.x - dst[i].x) * (p.x - dst[i].x) + (p.y - dst[i].y) * (p.y - dst[i].y);
    }
    return fit;
}

AffineFit compute_alignment_affine(const LandmarkSet68& src, const LandmarkSet68& dst) {
    return compute_alignment_affine(std::span<const Point2>(src), std::span<const Point2>(dst));
}

LandmarkSet68 warp_landmarks(const Affine2& map, const LandmarkSet68& landmarks) {
    LandmarkSet68 out;
    for (std::size_t i = 0; i < landmarks.size(); ++i) {
        out[i] = map.apply(landmarks[i]);
    }
    return out;
}

Mask expand_face_mask(const Mask& mask, int radius) {
    require_valid(mask, "mask");
    if (mask.channels != 1) {
        throw Error(ErrorCode::invalid_input, "mask must be single-channel");
    }
    if (radius < 0) {
        throw Error(ErrorCode::invalid_input, "expansion radius must be non-negative");
    }
    const int w = mask.width;
    const int h = mask.height;
    Mask out = make_mask(w, h);
    out.provenance = mask.provenance;
    if (radius == 0) {
        for (std::size_t i = 0; i < mask.pixels.size(); ++i) out.pixels[i] = mask.pixels[i] ? 255 : 0;
        return out;
    }
    // Horizontal distance to the nearest set pixel in each row, then a disc
    // test per vertical offset against the row half-widths.
    const int far = std::numeric_limits<int>::max() / 2;
    std::vector<int> row_dist(static_cast<std::size_t>(w) * h, far);
    for (int y = 0; y < h; ++y) {
        int* d = row_dist.data() + static_cast<std::size_t>(y) * w;
        int last = -far;
        for (int x = 0; x < w; ++x) {
            if (mask.at(x, y)) last = x;
            d[x] = x - last;
        }
        last = far + w;
        for (int x = w - 1; x >= 0; --x) {
            if (mask.at(x, y)) last = x;
            d[x] = std::min(d[x], last - x);
        }
    }
    std::vector<int> half(static_cast<std::size_t>(radius) + 1);
    for (int dy = 0; dy <= radius; ++dy) {
        int hw = 0;
        while ((hw + 1) * (hw + 1) + dy * dy <= radius * radius) ++hw;
        half[static_cast<std::size_t>(dy)] = hw;
    }
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int dy = -radius; dy <= radius; ++dy) {
                const int yy = y + dy;
                if (yy < 0 || yy >= h) continue;
                if (row_dist[static_cast<std::size_t>(yy) * w + x] <= half[static_cast<std::size_t>(std::abs(dy))]) {
                    out.at(x, y) = 255;
                    break;
                }
            }
        }
    }
    return out;
}

int expansion_radius_for(const CropRect& bbox, double fraction) {
    if (!(fraction >= 0.0) || !std::isfinite(fraction)) {
        throw Error(ErrorCode::invalid_input, "expansion fraction must be finite and non-negative");
    }
    const double diag = std::hypot(bbox.width(), bbox.height());
    return static_cast<int>(std::lround(fraction * diag));
}

Stage1Result stage1_generate_face(const PoseMap& template_pose, const IdentityProfile& profile,
                                  const lora::ModelWeights& weights, const BackendRegistry& registry,
                                  std::uint64_t seed, const std::string& prompt, int max_attempts) {
    if (max_attempts < 1) {
        throw Error(ErrorCode::invalid_input, "stage-1 attempt limit must be at least 1");
    }
    const auto t2i = registry.get<backends::TextToImage>();
    const auto fusion = registry.get<backends::FaceFusion>();
    const auto detector = registry.get<backends::FaceDetector>();

    ControlStack controls;
    PoseMap bone = template_pose;
    bone.kind = PoseKind::bone;
    bone.hand_points.clear();
    controls.pose = std::move(bone);
    controls.strength = 1.0;

    std::string last_failure = "no attempt made";
    for (int attempt = 0; attempt < max_attempts; ++attempt) {
        const std::uint64_t s = seed + static_cast<std::uint64_t>(attempt);
        const Image raw = t2i->generate(weights, {prompt, "", s, 0, 0}, &controls);
        Image fused = fusion->fuse(raw, profile.template_face().image, nullptr);
        try {
            const auto faces = detector->detect(fused);
            const auto& face = faces[face::primary_face(faces)];
            if (!face.landmarks68) {
                last_failure = "detector returned no 68-point landmarks";
                continue;
            }
            return {std::move(fused), *face.landmarks68, attempt + 1, s};
        } catch (const Error& e) {
            if (e.code() != ErrorCode::no_face) {
                throw;
            }
            last_failure = e.detail();
        }
    }
    throw Error(ErrorCode::stage1_failure, "no face in " + std::to_string(max_attempts) +
                                               " generated image(s); last: " + last_failure);
}

Stage2Result stage2_inpaint(const Image& template_image, const LandmarkSet68& warped_landmarks, const Mask& mask,
                            const IdentityProfile& profile, const lora::ModelWeights& weights,
                            const BackendRegistry& registry, const backends::GenerationParams& params,
                            double strength) {
    require_valid(template_image, "template");
    require_mask_for(mask, template_image);
    if (mask_count(mask) == 0) {
        throw Error(ErrorCode::invalid_input, "inpaint mask is empty");
    }
    const auto inpainter = registry.get<backends::Inpainter>();
    const auto fusion = registry.get<backends::FaceFusion>();

    ControlStack controls;
    PoseMap pose;
    pose.kind = PoseKind::face_landmarks;
    pose.width = template_image.width;
    pose.height = template_image.height;
    pose.provenance = template_image.provenance;
    for (const auto& p : warped_landmarks) {
        if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
            throw Error(ErrorCode::invalid_input, "warped landmark is not finite");
        }
        pose.points.push_back({std::clamp(p.x, 0.0, template_image.width - 1.0),
                               std::clamp(p.y, 0.0, template_image.height - 1.0)});
    }
    controls.pose = std::move(pose);
    const Mask outside = mask_complement(mask);
    controls.canny = EdgeControl{outside, edge_map(template_image, &outside)};
    controls.strength = strength;
    controls.validate();

    Stage2Result result;
    result.strength = strength;
    result.control_digest = controls.digest();
    result.control_kinds = controls.kinds();
    result.portrait = inpainter->inpaint(weights, template_image, mask, params, controls);
    if (strength > 0.0) {
        result.portrait = fusion->fuse(result.portrait, profile.template_face().image, &mask);
    }
    return result;
}

void InpaintOptions::validate() const {
    if (!(strength >= 0.0 && strength <= 1.0)) {
        throw Error(ErrorCode::invalid_input, "strength must be in [0, 1]");
    }
    if (!std::isfinite(face_weight)) {
        throw Error(ErrorCode::invalid_input, "face weight must be finite");
    }
    if (expansion_radius && *expansion_radius < 0) {
        throw Error(ErrorCode::invalid_input, "expansion radius must be non-negative");
    }
    if (!(window_scale >= 1.0) || !std::isfinite(window_scale)) {
        throw Error(ErrorCode::invalid_input, "window scale must be at least 1");
    }
    if (max_attempts < 1) {
        throw Error(ErrorCode::invalid_input, "stage-1 attempt limit must be at least 1");
    }
}

CropRect context_window(const CropRect& bbox, double scale, int image_width, int image_height) {
    const auto c = bbox.center();
    const double hw = 0.5 * scale * bbox.width();
    const double hh = 0.5 * scale * bbox.height();
    return {std::clamp(static_cast<int>(std::floor(c.x - hw)), 0, image_width),
            std::clamp(static_cast<int>(std::floor(c.y - hh)), 0, image_height),
            std::clamp(static_cast<int>(std::ceil(c.x + hw)), 0, image_width),
            std::clamp(static_cast<int>(std::ceil(c.y + hh)), 0, image_height)};
}

std::vector<int> reconstruction_error(const Image& image, const backends::Autoencoder& autoencoder) {
    const Image recon = autoencoder.decode(autoencoder.encode(image));
    if (recon.width != image.width || recon.height != image.height ||
        recon.channels != image.channels) {
        throw Error(ErrorCode::incompatible, "autoencoder changed the image shape");
    }
    std::vector<int> e(image.pixels.size());
    for (std::size_t i = 0; i < e.size(); ++i) {
        e[i] = static_cast<int>(image.pixels[i]) - static_cast<int>(recon.pixels[i]);
    }
    return e;
}

namespace {

struct FaceRun {
    Image image;
    FaceOutcome outcome;
};

lora::ModelWeights identity_weights(const IdentityProfile& profile, const lora::ModelWeights& base,
                                    double face_weight) {
    if (!profile.adapter) {
        throw Error(ErrorCode::invalid_input, "identity " + profile.id + " has no face adapter");
    }
    lora::AdapterSet adapters{{profile.adapter->id, profile.adapter}};
    return lora::merge_adapters(base, {{{profile.adapter->id, face_weight}}}, adapters);
}

const backends::FaceDetection& nearest_face(const std::vector<backends::FaceDetection>& faces, const CropRect& target) {
    const auto t = target.center();
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < faces.size(); ++i) {
        const auto c = faces[i].bbox.center();
        const double d = (c.x - t.x) * (c.x - t.x) + (c.y - t.y) * (c.y - t.y);
        if (d < best_d) {
            best_d = d;
            best = i;
        }
    }
    return faces[best];
}

// Stage 1 + warp + stage 2 for one face of `image`; `mask` is already expanded.
FaceRun process_face(const Image& image, const CropRect& target, const Mask& mask, const IdentityProfile& profile,
                     const lora::ModelWeights& base, const BackendRegistry& registry, const InpaintOptions& options,
                     std::uint64_t seed) {
    const auto detector = registry.get<backends::FaceDetector>();
    const auto pose_estimator = registry.get<backends::PoseEstimator>();

    const auto faces = detector->detect(image);
    const auto& face = nearest_face(faces, target);
    if (!face.landmarks68) {
        throw Error(ErrorCode::fixture_missing, "template face has no 68-point landmarks");
    }
    const auto weights = identity_weights(profile, base, options.face_weight);
    const auto prompt = generation::assemble_prompt(profile.trigger, "", options.prompt_extra);
    const PoseMap pose = pose_estimator->estimate(image, PoseKind::bone);

    const auto s1 = stage1_generate_face(pose, profile, weights, registry, seed, prompt, options.max_attempts);
    const auto fit = compute_alignment_affine(s1.landmarks, *face.landmarks68);
    const auto warped = warp_landmarks(fit.map, s1.landmarks);
    const auto s2 = stage2_inpaint(image, warped, mask, profile, weights, registry, {prompt, "", seed, 0, 0},
                                   options.strength);

    FaceRun run;
    run.image = s2.portrait;
    run.outcome.identity = profile.id;
    run.outcome.bbox = target;
    run.outcome.attempts = s1.attempts;
    run.outcome.seed = s1.seed;
    run.outcome.alignment_residual = fit.residual;
    run.outcome.control_digest = s2.control_digest;
    return run;
}

nlohmann::json rect_json(const CropRect& r) { return nlohmann::json::array({r.left, r.top, r.right, r.bottom}); }

nlohmann::json manifest_for(const char* mode, const InpaintResult& result, const InpaintOptions& options,
                            const BackendRegistry& registry, TimePoint started, TimePoint finished) {
    static constexpr BackendRole kRoles[] = {BackendRole::face_detector, BackendRole::human_parser,
                                             BackendRole::pose_estimator, BackendRole::text_to_image,
                                             BackendRole::inpainter,      BackendRole::face_fusion,
                                             BackendRole::autoencoder};
    nlohmann::json faces = nlohmann::json::array();
    for (const auto& f : result.faces) {
        faces.push_back({{"identity", f.identity},
                         {"bbox", rect_json(f.bbox)},
                         {"window", rect_json(f.window)},
                         {"expansion_radius", f.expansion_radius},
                         {"attempts", f.attempts},
                         {"seed", f.seed},
                         {"alignment_residual", f.alignment_residual},
                         {"control_digest", f.control_digest}});
    }
    return {{"kind", "inpaint"},
            {"mode", mode},
            {"strength", options.strength},
            {"face_weight", options.face_weight},
            {"expansion_fraction", options.expansion_fraction},
            {"window_scale", options.window_scale},
            {"compensation", options.compensate},
            {"seed", options.seed},
            {"faces", faces},
            {"backends", generation::backend_ids(registry, kRoles)},
            {"output_digest", image_digest(result.image)},
            {"timing",
             {{"started", iso8601(started)},
              {"finished", iso8601(finished)},
              {"elapsed_ms", std::chrono::duration_cast<std::chrono::milliseconds>(finished - started).count()}}}};
}

Mask face_region(const Image& image, const CropRect& bbox, const InpaintOptions& options,
                 const backends::HumanParser& parser, int& radius) {
    radius = options.expansion_radius.value_or(expansion_radius_for(bbox, options.expansion_fraction));
    Mask mask = expand_face_mask(parser.face_mask(image, bbox), radius);
    if (options.protect) {
        require_mask_for(*options.protect, image);
        mask = mask_subtract(mask, *options.protect);
    }
    return mask;
}

}  // namespace

InpaintResult inpaint_portrait(const Image& template_image, const IdentityProfile& profile,
                               const lora::ModelWeights& base, const BackendRegistry& registry,
                               const InpaintOptions& options, const Clock& clock) {
    options.validate();
    require_valid(template_image, "template");
    const auto started = clock();
    const auto detector = registry.get<backends::FaceDetector>();
    const auto parser = registry.get<backends::HumanParser>();

    const auto faces = detector->detect(template_image);
    const auto bbox = faces[face::primary_face(faces)].bbox;
    int radius = 0;
    const Mask mask = face_region(template_image, bbox, options, *parser, radius);

    auto run = process_face(template_image, bbox, mask, profile, base, registry, options, options.seed);
    run.outcome.window = {0, 0, template_image.width, template_image.height};
    run.outcome.expansion_radius = radius;

    InpaintResult result;
    result.image = std::move(run.image);
    result.image.provenance = template_image.provenance;
    result.faces.push_back(run.outcome);
    result.manifest = manifest_for("single", result, options, registry, started, clock());
    return result;
}

InpaintResult multi_id_inpaint(const Image& template_image, std::span<const FaceAssignment> faces,
                               const lora::ModelWeights& base, const BackendRegistry& registry,
                               const InpaintOptions& options, const Clock& clock) {
    options.validate();
    require_valid(template_image, "template");
    if (faces.empty()) {
        throw Error(ErrorCode::invalid_input, "multi-identity inpainting needs at least one face");
    }
    const auto started = clock();
    const auto parser = registry.get<backends::HumanParser>();
    const auto autoencoder = registry.get<backends::Autoencoder>();

    std::vector<Mask> masks;
    std::vector<int> radii(faces.size());
    std::vector<CropRect> windows;
    for (std::size_t i = 0; i < faces.size(); ++i) {
        if (faces[i].profile == nullptr) {
            throw Error(ErrorCode::invalid_input, "face " + std::to_string(i) + " has no identity");
        }
        if (faces[i].bbox.empty() || !faces[i].bbox.inside(template_image.width, template_image.height)) {
            throw Error(ErrorCode::invalid_input, "face " + std::to_string(i) + " box lies outside the template");
        }
        masks.push_back(face_region(template_image, faces[i].bbox, options, *parser, radii[i]));
        windows.push_back(context_window(faces[i].bbox, options.window_scale, template_image.width,
                                         template_image.height));
    }
    for (std::size_t i = 0; i < masks.size(); ++i) {
        for (std::size_t j = i + 1; j < masks.size(); ++j) {
            if (masks_intersect(masks[i], masks[j])) {
                throw Error(ErrorCode::overlap, "expanded masks of faces " + std::to_string(i) + " and " +
                                                    std::to_string(j) + " overlap");
            }
        }
    }

    InpaintResult result;
    result.image = template_image;
    for (std::size_t i = 0; i < faces.size(); ++i) {
        const auto& window = windows[i];
        const Image patch = crop(template_image, window);
        const Mask local = crop(masks[i], window);
        const CropRect target{faces[i].bbox.left - window.left, faces[i].bbox.top - window.top,
                              faces[i].bbox.right - window.left, faces[i].bbox.bottom - window.top};
        const auto& b = faces[i].bbox;
        const std::uint64_t seed = options.seed + Digest().update_value(b.left).update_value(b.top)
                                                      .update_value(b.right).update_value(b.bottom).value();
        auto run = process_face(patch, target, local, *faces[i].profile, base, registry, options, seed);

        // The processed window passes through the latent space before merging.
        Image merged = autoencoder->decode(autoencoder->encode(run.image));
        if (options.compensate) {
            const auto error = reconstruction_error(patch, *autoencoder);
            for (int y = 0; y < merged.height; ++y) {
                for (int x = 0; x < merged.width; ++x) {
                    if (local.at(x, y)) continue;
                    for (int c = 0; c < merged.channels; ++c) {
                        const auto k = merged.index(x, y, c);
                        merged.pixels[k] = static_cast<std::uint8_t>(std::clamp(merged.pixels[k] + error[k], 0, 255));
                    }
                }
            }
        }
        Mask writable(window.width(), window.height(), 1, 255);
        for (std::size_t j = 0; j < faces.size(); ++j) {
            if (j == i) continue;
            for (int y = 0; y < writable.height; ++y) {
                for (int x = 0; x < writable.width; ++x) {
                    if (masks[j].at(x + window.left, y + window.top)) writable.at(x, y) = 0;
                }
            }
        }
        paste(result.image, merged, window.left, window.top, &writable);

        run.outcome.window = window;
        run.outcome.expansion_radius = radii[i];
        result.faces.push_back(run.outcome);
    }
    result.manifest = manifest_for("multi", result, options, registry, started, clock());
    return result;
}

}  // namespace portraitgen::inpaint
