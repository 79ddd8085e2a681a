#include "portraitgen/service/workspace.h"

#include <algorithm>
#include <fstream>
#include <iterator>

#include "portraitgen/digest.h"
#include "portraitgen/error.h"

namespace portraitgen::service {

using generation::IdentityProfile;

void write_file_atomic(const fs::path& path, std::span<const std::uint8_t> bytes) {
    fs::create_directories(path.parent_path());
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!out) {
            throw Error(ErrorCode::io, "cannot write " + tmp.string());
        }
    }
    fs::rename(tmp, path);
}

void write_json_file(const fs::path& path, const nlohmann::json& j) {
    const std::string text = j.dump(2) + "\n";
    write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::vector<std::uint8_t> read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::not_found, "cannot read " + path.string());
    }
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

nlohmann::json read_json_file(const fs::path& path) {
    const auto bytes = read_file(path);
    try {
        return nlohmann::json::parse(bytes.begin(), bytes.end());
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::io, "corrupt JSON in " + path.string() + ": " + e.what());
    }
}

namespace {

nlohmann::json rect_json(const CropRect& r) { return nlohmann::json::array({r.left, r.top, r.right, r.bottom}); }

CropRect rect_from(const nlohmann::json& j) {
    return {j.at(0).get<int>(), j.at(1).get<int>(), j.at(2).get<int>(), j.at(3).get<int>()};
}

std::string face_file(std::size_t i, const char* kind) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s-%03zu.png", kind, i);
    return buf;
}

bool safe_component(const std::string& s) {
    return !s.empty() && s != "." && s != ".." && s.find('/') == std::string::npos &&
           s.find('\\') == std::string::npos && s.find('\0') == std::string::npos;
}

}  // namespace

nlohmann::json profile_to_json(const IdentityProfile& p) {
    nlohmann::json faces = nlohmann::json::array();
    for (std::size_t i = 0; i < p.faces.size(); ++i) {
        const auto& f = p.faces[i];
        nlohmann::json landmarks = nlohmann::json::array();
        for (const auto& pt : f.landmarks) landmarks.push_back({pt.x, pt.y});
        faces.push_back({{"input_index", f.input_index},
                         {"image_ref", f.image_ref},
                         {"image", "faces/" + face_file(i, "face")},
                         {"head_mask", "faces/" + face_file(i, "mask")},
                         {"landmarks", landmarks},
                         {"bbox", rect_json(f.bbox)},
                         {"retouched", f.retouched},
                         {"image_rotation", f.image_rotation},
                         {"face_angle", f.face_angle},
                         {"crop", rect_json(f.crop)},
                         {"crop_ratio", f.crop_ratio},
                         {"padded", f.padded},
                         {"quality", p.quality_scores.at(i)},
                         {"caption", p.captions.at(i)}});
    }
    nlohmann::json skipped = nlohmann::json::array();
    for (const auto& s : p.skipped) {
        skipped.push_back({{"input_index", s.input_index}, {"image_ref", s.image_ref}, {"reason", s.reason},
                           {"detail", s.detail}});
    }
    nlohmann::json training = nlohmann::json::object();
    for (const auto& [name, t] : p.training) {
        training[name] = {{"initial_loss", t.initial_loss}, {"final_loss", t.final_loss}};
    }
    return {{"id", p.id},
            {"trigger_word", p.trigger.text()},
            {"adapter", {{"id", p.adapter ? p.adapter->id : ""}, {"file", "adapter.lora"}}},
            {"template_index", p.template_index},
            {"template_embedding", p.template_embedding},
            {"faces", faces},
            {"skipped", skipped},
            {"training", training},
            {"config",
             {{"rank", p.config.rank},
              {"learning_rate", p.config.learning_rate},
              {"schedule", lora::to_string(p.config.schedule)},
              {"epochs", p.config.epochs},
              {"use_8bit_adamw", p.config.use_8bit_adamw},
              {"restart_cycles", p.config.restart_cycles}}},
            {"created", p.created}};
}

Workspace::Workspace(fs::path root) : root_(std::move(root)) {
    for (const auto& dir : {identities_dir(), styles_dir(), jobs_dir(), assets_dir()}) {
        fs::create_directories(dir);
    }
    const auto meta = root_ / "workspace.json";
    if (!fs::exists(meta)) {
        write_json_file(meta, {{"format", "portraitgen-workspace"}, {"version", 1}});
    }
}

std::string Workspace::reserve_identity_id(const std::string& base) {
    if (!safe_component(base)) {
        throw Error(ErrorCode::invalid_input, "bad identity id '" + base + "'");
    }
    std::lock_guard lock(mutex_);
    for (int n = 1;; ++n) {
        const std::string id = n == 1 ? base : base + "-" + std::to_string(n);
        if (fs::create_directory(identities_dir() / id)) {
            return id;
        }
    }
}

void Workspace::save_identity(const IdentityProfile& profile) {
    const auto dir = identities_dir() / profile.id;
    fs::create_directories(dir / "faces");
    for (std::size_t i = 0; i < profile.faces.size(); ++i) {
        const auto png = encode_png(profile.faces[i].image);
        write_file_atomic(dir / "faces" / face_file(i, "face"), png);
        const auto mask = encode_png(profile.faces[i].head_mask);
        write_file_atomic(dir / "faces" / face_file(i, "mask"), mask);
    }
    write_file_atomic(dir / "adapter.lora", lora::encode_adapter(*profile.adapter));
    // The profile file goes last: its presence marks a complete identity.
    write_json_file(dir / "profile.json", profile_to_json(profile));
}

IdentityProfile Workspace::load_identity(const std::string& id) const {
    if (!safe_component(id)) {
        throw Error(ErrorCode::not_found, "unknown identity '" + id + "'");
    }
    const auto dir = identities_dir() / id;
    if (!fs::exists(dir / "profile.json")) {
        throw Error(ErrorCode::not_found, "unknown identity '" + id + "'");
    }
    const auto j = read_json_file(dir / "profile.json");
    IdentityProfile p;
    try {
        p.id = j.at("id").get<std::string>();
        p.trigger = labeling::TriggerWord::parse(j.at("trigger_word").get<std::string>());
        p.adapter = std::make_shared<const lora::LoraAdapter>(lora::load_adapter(dir / "adapter.lora"));
        p.template_index = j.at("template_index").get<std::size_t>();
        p.template_embedding = j.at("template_embedding").get<std::vector<double>>();
        for (const auto& f : j.at("faces")) {
            face::FaceRecord r;
            r.input_index = f.at("input_index").get<std::size_t>();
            r.image_ref = f.at("image_ref").get<std::string>();
            r.image = load_png(dir / f.at("image").get<std::string>());
            r.image.provenance.source = r.image_ref;
            r.head_mask = load_png(dir / f.at("head_mask").get<std::string>());
            const auto& lm = f.at("landmarks");
            for (std::size_t k = 0; k < r.landmarks.size(); ++k) {
                r.landmarks[k] = {lm.at(k).at(0).get<double>(), lm.at(k).at(1).get<double>()};
            }
            r.bbox = rect_from(f.at("bbox"));
            r.retouched = f.at("retouched").get<bool>();
            r.image_rotation = f.at("image_rotation").get<int>();
            r.face_angle = f.at("face_angle").get<double>();
            r.crop = rect_from(f.at("crop"));
            r.crop_ratio = f.at("crop_ratio").get<double>();
            r.padded = f.at("padded").get<bool>();
            p.quality_scores.push_back(f.at("quality").get<double>());
            p.captions.push_back(f.at("caption").get<std::string>());
            p.faces.push_back(std::move(r));
        }
        for (const auto& s : j.at("skipped")) {
            p.skipped.push_back({s.at("input_index").get<std::size_t>(), s.at("image_ref").get<std::string>(),
                                 s.at("reason").get<std::string>(), s.at("detail").get<std::string>()});
        }
        for (const auto& [name, t] : j.at("training").items()) {
            p.training[name] = {t.at("initial_loss").get<double>(), t.at("final_loss").get<double>()};
        }
        const auto& c = j.at("config");
        p.config.rank = c.at("rank").get<int>();
        p.config.learning_rate = c.at("learning_rate").get<double>();
        p.config.schedule = lora::parse_lr_schedule(c.at("schedule").get<std::string>());
        p.config.epochs = c.at("epochs").get<int>();
        p.config.use_8bit_adamw = c.at("use_8bit_adamw").get<bool>();
        p.config.restart_cycles = c.at("restart_cycles").get<int>();
        p.created = j.at("created").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::io, "corrupt profile for identity " + id + ": " + e.what());
    }
    if (p.template_index >= p.faces.size()) {
        throw Error(ErrorCode::io, "identity " + id + " template index out of range");
    }
    return p;
}

bool Workspace::has_identity(const std::string& id) const {
    return safe_component(id) && fs::exists(identities_dir() / id / "profile.json");
}

std::vector<std::string> Workspace::list_identities() const {
    std::vector<std::string> ids;
    for (const auto& entry : fs::directory_iterator(identities_dir())) {
        if (entry.is_directory() && fs::exists(entry.path() / "profile.json")) {
            ids.push_back(entry.path().filename().string());
        }
    }
    std::sort(ids.begin(), ids.end());
    return ids;
}

nlohmann::json Workspace::identity_summary(const std::string& id) const {
    if (!has_identity(id)) {
        throw Error(ErrorCode::not_found, "unknown identity '" + id + "'");
    }
    auto j = read_json_file(identities_dir() / id / "profile.json");
    return {{"id", j.at("id")},
            {"trigger_word", j.at("trigger_word")},
            {"template_index", j.at("template_index")},
            {"face_count", j.at("faces").size()},
            {"skipped", j.at("skipped")},
            {"created", j.at("created")}};
}

std::vector<std::string> Workspace::store_upload(std::span<const UploadedFile> files) {
    if (files.empty()) {
        throw Error(ErrorCode::invalid_input, "upload contains no files");
    }
    Digest d;
    d.update("upload/v1");
    for (const auto& f : files) {
        if (!safe_component(f.filename)) {
            throw Error(ErrorCode::invalid_input, "bad upload filename '" + f.filename + "'");
        }
        d.update(f.filename).update(std::span<const std::uint8_t>(f.bytes));
    }
    std::string batch;
    {
        std::lock_guard lock(mutex_);
        const auto base = "upload-" + d.hex().substr(0, 12);
        for (int n = 1;; ++n) {
            batch = n == 1 ? base : base + "-" + std::to_string(n);
            if (fs::create_directory(assets_dir() / batch)) break;
        }
    }
    std::vector<std::string> refs;
    nlohmann::json listing = nlohmann::json::array();
    for (const auto& f : files) {
        write_file_atomic(assets_dir() / batch / f.filename, f.bytes);
        refs.push_back("assets/" + batch + "/" + f.filename);
        listing.push_back({{"filename", f.filename}, {"size", f.bytes.size()},
                           {"digest", Digest().update(std::span<const std::uint8_t>(f.bytes)).hex()}});
    }
    write_json_file(assets_dir() / batch / "upload.json", {{"batch", batch}, {"files", listing}});
    return refs;
}

fs::path Workspace::resolve_ref(const std::string& ref) const {
    const fs::path rel(ref);
    if (ref.empty() || rel.is_absolute()) {
        throw Error(ErrorCode::invalid_input, "asset reference must be workspace-relative: '" + ref + "'");
    }
    for (const auto& part : rel) {
        if (part == "..") {
            throw Error(ErrorCode::invalid_input, "asset reference escapes the workspace: '" + ref + "'");
        }
    }
    const auto path = root_ / rel;
    if (!fs::is_regular_file(path)) {
        throw Error(ErrorCode::not_found, "no such asset: '" + ref + "'");
    }
    return path;
}

}  // namespace portraitgen::service
