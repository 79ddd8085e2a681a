#include "portraitgen/styles.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <mutex>
#include <set>

#include "portraitgen/data_paths.h"
#include "portraitgen/digest.h"
#include "portraitgen/error.h"

namespace portraitgen::styles {

namespace fs = std::filesystem;

std::string_view to_string(StyleSource source) {
    switch (source) {
        case StyleSource::builtin: return "builtin";
        case StyleSource::local: return "local";
        case StyleSource::contributed: return "contributed";
    }
    return "local";
}

void StyleSpec::validate() const {
    const bool slug = !id.empty() && id.size() <= 64 && std::all_of(id.begin(), id.end(), [](char c) {
        return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '-' || c == '_';
    });
    if (!slug) {
        throw Error(ErrorCode::invalid_input, "style id must be 1-64 chars of [a-z0-9_-]: '" + id + "'");
    }
    if (name.empty()) {
        throw Error(ErrorCode::invalid_input, "style " + id + " has no name");
    }
    if (adapter.empty()) {
        throw Error(ErrorCode::invalid_input, "style " + id + " has no adapter");
    }
    if (!std::isfinite(recommended_weight)) {
        throw Error(ErrorCode::invalid_input, "style " + id + " recommended_weight must be finite");
    }
}

nlohmann::json to_json(const StyleSpec& spec) {
    return {{"id", spec.id},
            {"name", spec.name},
            {"adapter", spec.adapter},
            {"prompt_additions", spec.prompt_additions},
            {"negative_prompt", spec.negative_prompt},
            {"recommended_weight", spec.recommended_weight}};
}

StyleSpec style_from_json(const nlohmann::json& j) {
    if (!j.is_object()) {
        throw Error(ErrorCode::invalid_input, "style descriptor must be a JSON object");
    }
    auto text = [&](const char* key, bool required) -> std::string {
        if (!j.contains(key)) {
            if (required) {
                throw Error(ErrorCode::invalid_input, std::string("style descriptor lacks '") + key + "'");
            }
            return {};
        }
        if (!j.at(key).is_string()) {
            throw Error(ErrorCode::invalid_input, std::string("style field '") + key + "' must be a string");
        }
        return j.at(key).get<std::string>();
    };
    StyleSpec spec;
    spec.id = text("id", true);
    spec.name = text("name", true);
    spec.adapter = text("adapter", true);
    spec.prompt_additions = text("prompt_additions", false);
    spec.negative_prompt = text("negative_prompt", false);
    if (j.contains("recommended_weight")) {
        if (!j.at("recommended_weight").is_number()) {
            throw Error(ErrorCode::invalid_input, "style field 'recommended_weight' must be a number");
        }
        spec.recommended_weight = j.at("recommended_weight").get<double>();
    }
    spec.validate();
    return spec;
}

StyleScan scan_styles(const fs::path& directory, StyleSource source) {
    StyleScan scan;
    std::error_code ec;
    if (!fs::is_directory(directory, ec)) {
        return scan;
    }
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(directory)) {
        if (entry.is_regular_file() && entry.path().extension() == ".json") {
            files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end());
    std::set<std::string> seen;
    for (const auto& path : files) {
        try {
            std::ifstream in(path);
            auto spec = style_from_json(nlohmann::json::parse(in));
            if (!seen.insert(spec.id).second) {
                scan.skipped.push_back({path, "duplicate id " + spec.id});
                continue;
            }
            spec.source = source;
            spec.descriptor_path = path;
            scan.styles.push_back(std::move(spec));
        } catch (const nlohmann::json::exception& e) {
            scan.skipped.push_back({path, std::string("malformed JSON: ") + e.what()});
        } catch (const Error& e) {
            scan.skipped.push_back({path, e.detail()});
        }
    }
    std::sort(scan.styles.begin(), scan.styles.end(),
              [](const StyleSpec& a, const StyleSpec& b) { return a.id < b.id; });
    return scan;
}

std::shared_ptr<const lora::LoraAdapter> load_style_adapter(const StyleSpec& spec, const lora::ModelWeights& base) {
    constexpr std::string_view kBuiltin = "builtin:";
    lora::LoraAdapter adapter;
    if (spec.adapter.starts_with(kBuiltin)) {
        const auto name = spec.adapter.substr(kBuiltin.size());
        adapter = lora::synthetic_adapter("style/" + spec.id, base, kBuiltinStyleRank, hash_text("style:" + name));
    } else {
        fs::path path = spec.adapter;
        if (path.is_relative() && !spec.descriptor_path.empty()) {
            path = spec.descriptor_path.parent_path() / path;
        }
        if (!fs::exists(path)) {
            throw Error(ErrorCode::not_found, "style " + spec.id + " adapter file not found: " + path.string());
        }
        adapter = lora::load_adapter(path);
        adapter.id = "style/" + spec.id;
    }
    adapter.metadata.kind = "style";
    return std::make_shared<const lora::LoraAdapter>(std::move(adapter));
}

StyleRegistry::StyleRegistry(std::vector<Directory> directories) : directories_(std::move(directories)) { rescan(); }

void StyleRegistry::rescan() {
    StyleScan merged;
    std::set<std::string> ids;
    for (const auto& dir : directories_) {
        auto scan = scan_styles(dir.path, dir.source);
        for (auto& spec : scan.styles) {
            if (!ids.insert(spec.id).second) {
                merged.skipped.push_back({spec.descriptor_path, "id " + spec.id + " shadowed by an earlier directory"});
                continue;
            }
            merged.styles.push_back(std::move(spec));
        }
        for (auto& skip : scan.skipped) {
            merged.skipped.push_back(std::move(skip));
        }
    }
    std::sort(merged.styles.begin(), merged.styles.end(),
              [](const StyleSpec& a, const StyleSpec& b) { return a.id < b.id; });
    std::unique_lock lock(mutex_);
    scan_ = std::move(merged);
}

std::vector<StyleSpec> StyleRegistry::list() const {
    std::shared_lock lock(mutex_);
    return scan_.styles;
}

std::vector<StyleSkip> StyleRegistry::skipped() const {
    std::shared_lock lock(mutex_);
    return scan_.skipped;
}

std::optional<StyleSpec> StyleRegistry::find(const std::string& id) const {
    std::shared_lock lock(mutex_);
    for (const auto& spec : scan_.styles) {
        if (spec.id == id) {
            return spec;
        }
    }
    return std::nullopt;
}

StyleSpec StyleRegistry::add(StyleSpec spec) {
    spec.validate();
    const auto dir = std::find_if(directories_.begin(), directories_.end(),
                                  [](const Directory& d) { return d.source == StyleSource::local; });
    if (dir == directories_.end()) {
        throw Error(ErrorCode::invalid_config, "no writable style directory configured");
    }
    {
        std::unique_lock lock(mutex_);
        for (const auto& existing : scan_.styles) {
            if (existing.id == spec.id) {
                throw Error(ErrorCode::conflict, "style " + spec.id + " already exists");
            }
        }
        fs::create_directories(dir->path);
        const auto path = dir->path / (spec.id + ".json");
        if (fs::exists(path)) {
            throw Error(ErrorCode::conflict, "descriptor file already exists: " + path.string());
        }
        std::ofstream out(path);
        out << to_json(spec).dump(2) << '\n';
        if (!out) {
            throw Error(ErrorCode::io, "cannot write " + path.string());
        }
        spec.source = dir->source;
        spec.descriptor_path = path;
    }
    rescan();
    return spec;
}

fs::path builtin_styles_dir() { return data_dir() / "styles"; }

}  // namespace portraitgen::styles
