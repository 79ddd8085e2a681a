#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "portraitgen/lora.h"

namespace portraitgen::styles {

enum class StyleSource { builtin, local, contributed };
std::string_view to_string(StyleSource source);

/// A style descriptor file: {id, name, adapter, prompt_additions, negative_prompt,
/// recommended_weight}. `adapter` is either "builtin:<name>" or a path to an
/// adapter file relative to the descriptor.
struct StyleSpec {
    std::string id;
    std::string name;
    std::string adapter;
    std::string prompt_additions;
    std::string negative_prompt;
    double recommended_weight = 1.0;
    StyleSource source = StyleSource::local;
    std::filesystem::path descriptor_path;

    /// Throws invalid-input on an empty or non-slug id, missing name/adapter, or a non-finite weight.
    void validate() const;
};

/// Descriptor fields only (source and path are not part of the file).
nlohmann::json to_json(const StyleSpec& spec);
StyleSpec style_from_json(const nlohmann::json& j);

struct StyleSkip {
    std::filesystem::path path;
    std::string reason;
};

struct StyleScan {
    std::vector<StyleSpec> styles;  // sorted by id
    std::vector<StyleSkip> skipped;
};

/// Reads every *.json descriptor in `directory`. Never writes. A missing directory scans as empty.
StyleScan scan_styles(const std::filesystem::path& directory, StyleSource source = StyleSource::local);

/// Rank of the adapters synthesized for "builtin:" styles.
inline constexpr int kBuiltinStyleRank = 4;

/// Loads or synthesizes the style's adapter against `base`. The adapter id is "style/<style id>".
std::shared_ptr<const lora::LoraAdapter> load_style_adapter(const StyleSpec& spec, const lora::ModelWeights& base);

/// Styles merged from several directories. Earlier directories win on id clashes.
class StyleRegistry {
public:
    struct Directory {
        std::filesystem::path path;
        StyleSource source = StyleSource::local;
    };

    explicit StyleRegistry(std::vector<Directory> directories);

    void rescan();
    std::vector<StyleSpec> list() const;
    std::vector<StyleSkip> skipped() const;
    std::optional<StyleSpec> find(const std::string& id) const;
    /// Writes "<id>.json" into the first local directory. Throws conflict when the id exists.
    StyleSpec add(StyleSpec spec);

private:
    std::vector<Directory> directories_;
    StyleScan scan_;
    mutable std::shared_mutex mutex_;
};

/// data/styles shipped with the project.
std::filesystem::path builtin_styles_dir();

}  // namespace portraitgen::styles
