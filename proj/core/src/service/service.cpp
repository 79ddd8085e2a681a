#include "portraitgen/service/service.h"

#include <algorithm>
#include <cstdlib>

#include "portraitgen/applications.h"
#include "portraitgen/error.h"
#include "portraitgen/inpaint.h"
#include "portraitgen/preprocess.h"

namespace portraitgen::service {

using generation::IdentityProfile;
using nlohmann::json;

namespace {

json require_object(const json& j, const char* what) {
    if (!j.is_object()) {
        throw Error(ErrorCode::invalid_input, std::string(what) + " must be a JSON object");
    }
    return j;
}

template <class T>
T field(const json& j, const char* key, T fallback) {
    if (!j.contains(key) || j.at(key).is_null()) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw Error(ErrorCode::invalid_input, std::string("field '") + key + "' has the wrong type");
    }
}

template <class T>
T required(const json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) {
        throw Error(ErrorCode::invalid_input, std::string("field '") + key + "' is required");
    }
    return field<T>(j, key, T{});
}

std::string sample_name(std::size_t rank) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "sample-%03zu.png", rank);
    return buf;
}

Mask load_mask(const fs::path& path) {
    Mask m = to_gray(load_png(path));
    for (auto& v : m.pixels) v = v >= 128 ? 255 : 0;
    return m;
}

json finish(const fs::path& dir, const json& manifest, std::vector<std::string> files) {
    write_json_file(dir / "manifest.json", manifest);
    return {{"manifest", "manifest.json"}, {"files", files}};
}

}  // namespace

fs::path workspace_from_environment() {
    if (const char* env = std::getenv(kWorkspaceEnv); env != nullptr && *env != '\0') {
        return env;
    }
    return "portraitgen-workspace";
}

Service::Service(ServiceConfig config)
    : config_(std::move(config)),
      workspace_(config_.workspace),
      registry_(config_.backend_manifest ? backends::BackendRegistry::from_manifest_file(*config_.backend_manifest)
                                         : backends::registry_from_environment()),
      base_(lora::toy_base_model()) {
    styles_ = std::make_unique<styles::StyleRegistry>(std::vector<styles::StyleRegistry::Directory>{
        {styles::builtin_styles_dir(), styles::StyleSource::builtin},
        {workspace_.styles_dir(), styles::StyleSource::local}});
    jobs_ = std::make_unique<JobQueue>(workspace_, config_.clock, config_.workers);
    jobs_->set_handler(JobKind::train, [this](const JobRecord& j, const fs::path& d) { return run_train(j, d); });
    jobs_->set_handler(JobKind::generate, [this](const JobRecord& j, const fs::path& d) { return run_generate(j, d); });
    jobs_->set_handler(JobKind::inpaint, [this](const JobRecord& j, const fs::path& d) { return run_inpaint(j, d); });
    jobs_->set_handler(JobKind::tryon, [this](const JobRecord& j, const fs::path& d) { return run_tryon(j, d); });
    jobs_->set_handler(JobKind::talkinghead,
                       [this](const JobRecord& j, const fs::path& d) { return run_talkinghead(j, d); });
    recovered_ = jobs_->recover();
    if (config_.start_workers) {
        jobs_->start();
    }
}

Service::~Service() { jobs_->stop(); }

fs::path Service::resolve_input(const std::string& ref) const {
    const fs::path p(ref);
    if (p.is_absolute()) {
        if (!config_.allow_absolute_paths) {
            throw Error(ErrorCode::invalid_input, "absolute paths are not accepted: '" + ref + "'");
        }
        if (!fs::is_regular_file(p)) {
            throw Error(ErrorCode::not_found, "no such file: '" + ref + "'");
        }
        return p;
    }
    return workspace_.resolve_ref(ref);
}

std::shared_ptr<const IdentityProfile> Service::identity(const std::string& id) {
    {
        std::lock_guard lock(profiles_mutex_);
        const auto it = profiles_.find(id);
        if (it != profiles_.end()) return it->second;
    }
    auto profile = std::make_shared<const IdentityProfile>(workspace_.load_identity(id));
    std::lock_guard lock(profiles_mutex_);
    return profiles_.emplace(id, std::move(profile)).first->second;
}

json Service::job_results(const std::string& job_id) const {
    const auto job = jobs_->get(job_id);
    if (!job) {
        throw Error(ErrorCode::not_found, "unknown job '" + job_id + "'");
    }
    if (job->state != JobState::succeeded) {
        throw Error(ErrorCode::conflict, "job " + job_id + " is " + std::string(to_string(job->state)));
    }
    const auto dir = workspace_.job_dir(job_id);
    return {{"job", job_id},
            {"manifest", read_json_file(dir / job->results.at("manifest").get<std::string>())},
            {"files", job->results.at("files")}};
}

styles::StyleSpec Service::add_style(const json& descriptor) {
    auto spec = styles::style_from_json(require_object(descriptor, "style descriptor"));
    return styles_->add(std::move(spec));
}

// ---- train ------------------------------------------------------------------

std::string Service::submit_train(const json& request) {
    require_object(request, "train request");
    const auto images = field<std::vector<std::string>>(request, "images", {});
    std::size_t usable = 0;
    for (const auto& ref : images) {
        const auto path = resolve_input(ref);
        usable += is_image_path(path) ? 1 : 0;
    }
    if (usable == 0) {
        throw Error(ErrorCode::empty_training_set, "no images to train on");
    }
    const auto id = field<std::string>(request, "identity", "");
    if (!id.empty() && workspace_.has_identity(id)) {
        throw Error(ErrorCode::conflict, "identity " + id + " already exists");
    }
    return jobs_->submit(JobKind::train, {{"images", images}, {"identity", id}});
}

json Service::run_train(const JobRecord& job, const fs::path& dir) {
    std::vector<Image> images;
    std::vector<std::string> refs;
    for (const auto& ref : job.request.at("images")) {
        const auto path = resolve_input(ref.get<std::string>());
        if (is_image_path(path)) {
            images.push_back(load_image_asset(path));
            refs.push_back(ref.get<std::string>());
        }
    }
    generation::TrainOptions options;
    options.clock = config_.clock;
    const auto requested = job.request.value("identity", std::string());
    const auto id = workspace_.reserve_identity_id(requested.empty() ? generation::derive_identity_id(images) : requested);
    options.identity_id = id;
    try {
        auto profile = generation::train_identity(images, registry_, base_, options);
        // Record the references as submitted, not where the workspace happens to live.
        for (auto& f : profile.faces) f.image_ref = refs.at(f.input_index);
        for (auto& s : profile.skipped) s.image_ref = refs.at(s.input_index);
        workspace_.save_identity(profile);
    } catch (...) {
        std::error_code ec;
        fs::remove_all(workspace_.identities_dir() / id, ec);
        throw;
    }
    return finish(dir, {{"kind", "train"}, {"identity", workspace_.identity_summary(id)}}, {});
}

// ---- generate ---------------------------------------------------------------

std::string Service::submit_generate(const json& request) {
    const auto req = generation::generation_request_from_json(require_object(request, "generation request"));
    if (!workspace_.has_identity(req.identity_id)) {
        throw Error(ErrorCode::not_found, "unknown identity '" + req.identity_id + "'");
    }
    if (!styles_->find(req.style_id)) {
        styles_->rescan();
        if (!styles_->find(req.style_id)) {
            throw Error(ErrorCode::not_found, "unknown style '" + req.style_id + "'");
        }
    }
    return jobs_->submit(JobKind::generate, generation::to_json(req));
}

json Service::run_generate(const JobRecord& job, const fs::path& dir) {
    const auto req = generation::generation_request_from_json(job.request);
    const auto profile = identity(req.identity_id);
    const auto style = styles_->find(req.style_id);
    if (!style) {
        throw Error(ErrorCode::not_found, "unknown style '" + req.style_id + "'");
    }
    const auto adapter = styles::load_style_adapter(*style, base_);
    auto result = generation::generate_portraits(req, *profile, *style, adapter, base_, registry_, config_.clock);
    std::vector<std::string> files;
    for (std::size_t i = 0; i < result.samples.size(); ++i) {
        const auto name = sample_name(result.samples[i].rank);
        write_file_atomic(dir / name, encode_png(result.samples[i].image));
        result.manifest["samples"][i]["image"] = name;
        files.push_back(name);
    }
    return finish(dir, result.manifest, files);
}

// ---- inpaint ----------------------------------------------------------------

namespace {

inpaint::InpaintOptions inpaint_options_from(const json& r) {
    inpaint::InpaintOptions o;
    o.strength = field<double>(r, "strength", inpaint::kDefaultInpaintStrength);
    o.seed = field<std::uint64_t>(r, "seed", 0);
    o.compensate = field<bool>(r, "compensate", true);
    if (r.contains("expansion_radius") && !r.at("expansion_radius").is_null()) {
        o.expansion_radius = field<int>(r, "expansion_radius", 0);
    }
    o.face_weight = field<double>(r, "face_weight", lora::kDefaultFaceWeight);
    o.prompt_extra = field<std::string>(r, "prompt_extra", "");
    o.max_attempts = field<int>(r, "max_attempts", inpaint::kDefaultStage1Attempts);
    o.validate();
    return o;
}

}  // namespace

std::string Service::submit_inpaint(const json& request) {
    require_object(request, "inpaint request");
    const auto ids = required<std::vector<std::string>>(request, "identities");
    if (ids.empty()) {
        throw Error(ErrorCode::invalid_input, "at least one identity is required");
    }
    for (const auto& id : ids) {
        if (!workspace_.has_identity(id)) throw Error(ErrorCode::not_found, "unknown identity '" + id + "'");
    }
    resolve_input(required<std::string>(request, "template"));
    inpaint_options_from(request);
    return jobs_->submit(JobKind::inpaint, request);
}

json Service::run_inpaint(const JobRecord& job, const fs::path& dir) {
    const auto& r = job.request;
    const auto options = inpaint_options_from(r);
    const Image tpl = load_image_asset(resolve_input(r.at("template").get<std::string>()));
    std::vector<std::shared_ptr<const IdentityProfile>> profiles;
    for (const auto& id : r.at("identities")) profiles.push_back(identity(id.get<std::string>()));

    inpaint::InpaintResult result;
    if (profiles.size() == 1) {
        result = inpaint::inpaint_portrait(tpl, *profiles[0], base_, registry_, options, config_.clock);
    } else {
        auto faces = registry_.get<backends::FaceDetector>()->detect(tpl);
        if (faces.size() != profiles.size()) {
            throw Error(ErrorCode::invalid_input, "template has " + std::to_string(faces.size()) + " faces but " +
                                                      std::to_string(profiles.size()) + " identities were given");
        }
        // Identities are assigned to faces left to right.
        std::stable_sort(faces.begin(), faces.end(), [](const auto& a, const auto& b) {
            return a.bbox.left < b.bbox.left;
        });
        std::vector<inpaint::FaceAssignment> assignments;
        for (std::size_t i = 0; i < faces.size(); ++i) assignments.push_back({faces[i].bbox, profiles[i].get()});
        result = inpaint::multi_id_inpaint(tpl, assignments, base_, registry_, options, config_.clock);
    }
    write_file_atomic(dir / "result.png", encode_png(result.image));
    result.manifest["image"] = "result.png";
    return finish(dir, result.manifest, {"result.png"});
}

// ---- try-on -----------------------------------------------------------------

std::string Service::submit_tryon(const json& request) {
    require_object(request, "try-on request");
    resolve_input(required<std::string>(request, "template"));
    resolve_input(required<std::string>(request, "mask"));
    const auto id = field<std::string>(request, "identity", "");
    if (!id.empty() && !workspace_.has_identity(id)) {
        throw Error(ErrorCode::not_found, "unknown identity '" + id + "'");
    }
    if (field<bool>(request, "refine", false) && id.empty()) {
        throw Error(ErrorCode::invalid_input, "refinement needs an identity");
    }
    field<std::string>(request, "prompt", "");
    field<std::uint64_t>(request, "seed", 0);
    return jobs_->submit(JobKind::tryon, request);
}

json Service::run_tryon(const JobRecord& job, const fs::path& dir) {
    const auto& r = job.request;
    apps::TryOnRequest req;
    req.garment_template = load_image_asset(resolve_input(r.at("template").get<std::string>()));
    req.garment_mask = load_mask(resolve_input(r.at("mask").get<std::string>()));
    std::shared_ptr<const IdentityProfile> profile;
    if (const auto id = field<std::string>(r, "identity", ""); !id.empty()) {
        profile = identity(id);
        req.identity = profile.get();
    }
    req.prompt = field<std::string>(r, "prompt", "");
    req.seed = field<std::uint64_t>(r, "seed", 0);
    req.refine = field<bool>(r, "refine", false);
    auto result = apps::virtual_tryon(req, base_, registry_, config_.clock);
    write_file_atomic(dir / "result.png", encode_png(result.image));
    result.manifest["image"] = "result.png";
    return finish(dir, result.manifest, {"result.png"});
}

// ---- talking head -----------------------------------------------------------

namespace {

apps::AudioSource::Kind audio_kind(const std::string& text) {
    if (text == "tts") return apps::AudioSource::Kind::tts;
    if (text == "file") return apps::AudioSource::Kind::file;
    if (text == "recording") return apps::AudioSource::Kind::recording;
    throw Error(ErrorCode::invalid_input, "audio kind must be tts, file or recording");
}

}  // namespace

std::string Service::submit_talkinghead(const json& request) {
    require_object(request, "talking-head request");
    resolve_input(required<std::string>(request, "portrait"));
    apps::validate_talking_head_options(field<int>(request, "resolution", 256), field<int>(request, "pose_index", 0),
                                        field<double>(request, "expression_scale", 1.0),
                                        field<double>(request, "blink_rate", 1.0));
    const auto audio = require_object(required<json>(request, "audio"), "audio");
    const auto kind = audio_kind(required<std::string>(audio, "kind"));
    if (kind == apps::AudioSource::Kind::tts) {
        if (required<std::string>(audio, "text").empty()) {
            throw Error(ErrorCode::invalid_input, "text-to-speech needs text");
        }
    } else {
        apps::decode_wav(read_file(resolve_input(required<std::string>(audio, "ref"))));
    }
    return jobs_->submit(JobKind::talkinghead, request);
}

json Service::run_talkinghead(const JobRecord& job, const fs::path& dir) {
    const auto& r = job.request;
    apps::TalkingHeadRequest req;
    req.portrait = load_image_asset(resolve_input(r.at("portrait").get<std::string>()));
    const auto& audio = r.at("audio");
    req.audio.kind = audio_kind(audio.at("kind").get<std::string>());
    req.audio.text = field<std::string>(audio, "text", "");
    req.audio.voice = field<std::string>(audio, "voice", "default");
    if (req.audio.kind != apps::AudioSource::Kind::tts) {
        const auto path = resolve_input(audio.at("ref").get<std::string>());
        if (req.audio.kind == apps::AudioSource::Kind::file) {
            req.audio.path = path;
        } else {
            req.audio.bytes = read_file(path);
        }
    }
    req.resolution = field<int>(r, "resolution", 256);
    req.pose_index = field<int>(r, "pose_index", 0);
    req.expression_scale = field<double>(r, "expression_scale", 1.0);
    req.blink_rate = field<double>(r, "blink_rate", 1.0);
    req.upscale = field<bool>(r, "upscale", false);
    auto result = apps::make_talking_head(req, registry_, config_.clock);
    write_file_atomic(dir / "audio.wav", apps::encode_wav(result.audio));
    result.manifest["audio"] = "audio.wav";
    return finish(dir, result.manifest, {"audio.wav"});
}

}  // namespace portraitgen::service
