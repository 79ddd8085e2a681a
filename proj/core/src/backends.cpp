#include "portraitgen/backends.h"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <mutex>

#include "portraitgen/data_paths.h"
#include "portraitgen/stub_backends.h"

namespace portraitgen::backends {

namespace {

constexpr std::array<BackendRole, 17> kRoles = {
    BackendRole::rotation_classifier, BackendRole::face_detector,     BackendRole::human_parser,
    BackendRole::skin_retoucher,      BackendRole::tagger,            BackendRole::attribute_predictor,
    BackendRole::quality_assessor,    BackendRole::face_embedder,     BackendRole::face_fusion,
    BackendRole::text_to_image,       BackendRole::inpainter,         BackendRole::pose_estimator,
    BackendRole::depth_estimator,     BackendRole::autoencoder,       BackendRole::talking_head_driver,
    BackendRole::upscaler,            BackendRole::tts,
};

constexpr std::array<std::string_view, 17> kRoleNames = {
    "rotation-classifier", "face-detector",   "human-parser",    "skin-retoucher", "tagger",
    "attribute-predictor", "quality-assessor", "face-embedder",  "face-fusion",    "text-to-image",
    "inpainter",           "pose-estimator",  "depth-estimator", "autoencoder",    "talking-head-driver",
    "upscaler",            "tts",
};

}  // namespace

std::span<const BackendRole> all_roles() { return kRoles; }

std::string_view role_name(BackendRole role) { return kRoleNames[static_cast<std::size_t>(role)]; }

BackendRole parse_role(std::string_view name) {
    for (std::size_t i = 0; i < kRoleNames.size(); ++i) {
        if (kRoleNames[i] == name) {
            return kRoles[i];
        }
    }
    throw Error(ErrorCode::invalid_input, "unknown backend role " + std::string(name));
}

void BackendDescriptor::validate() const {
    if (id.empty()) {
        throw Error(ErrorCode::invalid_input, "backend id must not be empty");
    }
    if (kind == BackendKind::hub && (!hub_uri || hub_uri->empty())) {
        throw Error(ErrorCode::invalid_input, "hub backend " + id + " requires hub_uri");
    }
}

void to_json(nlohmann::json& j, const BackendDescriptor& d) {
    j = nlohmann::json{{"role", role_name(d.role)},
                       {"id", d.id},
                       {"kind", d.kind == BackendKind::hub ? "hub" : "stub"},
                       {"config", d.config}};
    if (d.hub_uri) {
        j["hub_uri"] = *d.hub_uri;
    }
    if (d.is_default) {
        j["default"] = true;
    }
}

void from_json(const nlohmann::json& j, BackendDescriptor& d) {
    try {
        d.role = parse_role(j.at("role").get<std::string>());
        d.id = j.at("id").get<std::string>();
        const auto kind = j.value("kind", std::string("stub"));
        if (kind != "stub" && kind != "hub") {
            throw Error(ErrorCode::invalid_input, "unknown backend kind " + kind);
        }
        d.kind = kind == "hub" ? BackendKind::hub : BackendKind::stub;
        d.hub_uri.reset();
        if (j.contains("hub_uri") && !j.at("hub_uri").is_null()) {
            d.hub_uri = j.at("hub_uri").get<std::string>();
        }
        d.config.clear();
        if (j.contains("config")) {
            for (const auto& [k, v] : j.at("config").items()) {
                d.config[k] = v.is_string() ? v.get<std::string>() : v.dump();
            }
        }
        d.is_default = j.value("default", false);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::invalid_input, std::string("malformed backend descriptor: ") + e.what());
    }
    d.validate();
}

std::shared_ptr<Backend> default_backend_factory(const BackendDescriptor& descriptor) {
    if (descriptor.kind == BackendKind::hub) {
        return nullptr;
    }
    return make_stub(descriptor);
}

BackendRegistry::BackendRegistry() : BackendRegistry(default_backend_factory) {}

BackendRegistry::BackendRegistry(BackendFactory factory) : factory_(std::move(factory)) {}

BackendRegistry::BackendRegistry(BackendRegistry&& other) noexcept {
    std::unique_lock lock(other.mutex_);
    factory_ = std::move(other.factory_);
    entries_ = std::move(other.entries_);
    defaults_ = std::move(other.defaults_);
}

BackendRegistry& BackendRegistry::operator=(BackendRegistry&& other) noexcept {
    if (this != &other) {
        std::scoped_lock lock(mutex_, other.mutex_);
        factory_ = std::move(other.factory_);
        entries_ = std::move(other.entries_);
        defaults_ = std::move(other.defaults_);
    }
    return *this;
}

void BackendRegistry::register_backend(const BackendDescriptor& descriptor) {
    descriptor.validate();
    auto instance = factory_ ? factory_(descriptor) : nullptr;
    std::unique_lock lock(mutex_);
    for (const auto& e : entries_) {
        if (e.descriptor.role == descriptor.role && e.descriptor.id == descriptor.id) {
            throw Error(ErrorCode::conflict, "backend " + descriptor.id + " already registered for role " +
                                                 std::string(role_name(descriptor.role)));
        }
    }
    if (descriptor.is_default || !defaults_.contains(descriptor.role)) {
        defaults_[descriptor.role] = descriptor.id;
    }
    entries_.push_back({descriptor, std::move(instance)});
}

void BackendRegistry::register_backend(std::shared_ptr<Backend> instance) {
    if (!instance) {
        throw Error(ErrorCode::invalid_input, "null backend instance");
    }
    const auto& descriptor = instance->descriptor();
    descriptor.validate();
    std::unique_lock lock(mutex_);
    for (const auto& e : entries_) {
        if (e.descriptor.role == descriptor.role && e.descriptor.id == descriptor.id) {
            throw Error(ErrorCode::conflict, "backend " + descriptor.id + " already registered for role " +
                                                 std::string(role_name(descriptor.role)));
        }
    }
    if (descriptor.is_default || !defaults_.contains(descriptor.role)) {
        defaults_[descriptor.role] = descriptor.id;
    }
    entries_.push_back({descriptor, std::move(instance)});
}

std::shared_ptr<Backend> BackendRegistry::resolve(BackendRole role, std::optional<std::string_view> id) const {
    std::shared_lock lock(mutex_);
    std::string wanted;
    if (id && !id->empty()) {
        wanted = std::string(*id);
    } else {
        const auto it = defaults_.find(role);
        if (it == defaults_.end()) {
            throw Error(ErrorCode::resolution, "no backend registered for role " + std::string(role_name(role)));
        }
        wanted = it->second;
    }
    for (const auto& e : entries_) {
        if (e.descriptor.role == role && e.descriptor.id == wanted) {
            if (!e.instance) {
                throw Error(ErrorCode::backend_unavailable,
                            "backend " + wanted + " (" + e.descriptor.hub_uri.value_or("no uri") +
                                ") has no implementation in this build");
            }
            return e.instance;
        }
    }
    throw Error(ErrorCode::resolution,
                "unknown backend " + wanted + " for role " + std::string(role_name(role)));
}

void BackendRegistry::set_default(BackendRole role, const std::string& id) {
    std::unique_lock lock(mutex_);
    const bool known = std::any_of(entries_.begin(), entries_.end(), [&](const Entry& e) {
        return e.descriptor.role == role && e.descriptor.id == id;
    });
    if (!known) {
        throw Error(ErrorCode::resolution, "cannot make unknown backend " + id + " the default");
    }
    defaults_[role] = id;
}

std::optional<std::string> BackendRegistry::default_id(BackendRole role) const {
    std::shared_lock lock(mutex_);
    const auto it = defaults_.find(role);
    if (it == defaults_.end()) {
        return std::nullopt;
    }
    return it->second;
}

bool BackendRegistry::contains(BackendRole role, std::string_view id) const {
    std::shared_lock lock(mutex_);
    return std::any_of(entries_.begin(), entries_.end(),
                       [&](const Entry& e) { return e.descriptor.role == role && e.descriptor.id == id; });
}

std::vector<BackendDescriptor> BackendRegistry::descriptors() const {
    std::shared_lock lock(mutex_);
    std::vector<BackendDescriptor> out;
    for (const auto& e : entries_) {
        auto d = e.descriptor;
        const auto it = defaults_.find(d.role);
        d.is_default = it != defaults_.end() && it->second == d.id;
        out.push_back(std::move(d));
    }
    return out;
}

nlohmann::json BackendRegistry::to_manifest() const {
    auto manifest = nlohmann::json::array();
    for (const auto& d : descriptors()) {
        manifest.push_back(d);
    }
    return manifest;
}

BackendRegistry BackendRegistry::from_manifest(const nlohmann::json& manifest, BackendFactory factory) {
    if (!manifest.is_array()) {
        throw Error(ErrorCode::invalid_input, "backend manifest must be a JSON array");
    }
    BackendRegistry registry(std::move(factory));
    for (const auto& item : manifest) {
        registry.register_backend(item.get<BackendDescriptor>());
    }
    return registry;
}

BackendRegistry BackendRegistry::from_manifest_file(const std::filesystem::path& path, BackendFactory factory) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorCode::not_found, "cannot open backend manifest " + path.string());
    }
    nlohmann::json manifest;
    try {
        in >> manifest;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::invalid_input, std::string("backend manifest is not valid JSON: ") + e.what());
    }
    return from_manifest(manifest, std::move(factory));
}

BackendRegistry BackendRegistry::with_stubs() {
    BackendRegistry registry;
    for (auto role : all_roles()) {
        BackendDescriptor d;
        d.role = role;
        d.id = "stub";
        d.kind = BackendKind::stub;
        registry.register_backend(d);
    }
    return registry;
}

BackendRegistry registry_from_environment() {
    if (const char* path = std::getenv(kBackendManifestEnv); path != nullptr && *path != '\0') {
        return BackendRegistry::from_manifest_file(path);
    }
    return BackendRegistry::with_stubs();
}

std::vector<BackendDescriptor> shipped_hub_descriptors() {
    const auto path = data_dir() / "hub_backends.json";
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorCode::not_found, "cannot open " + path.string());
    }
    const auto manifest = nlohmann::json::parse(in);
    std::vector<BackendDescriptor> out;
    for (const auto& item : manifest) {
        out.push_back(item.get<BackendDescriptor>());
    }
    return out;
}

}  // namespace portraitgen::backends
