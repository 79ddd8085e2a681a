#pragma once

#include <cstdint>
#include <filesystem>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "portraitgen/generation.h"

namespace portraitgen::service {

namespace fs = std::filesystem;

/// Writes "<path>.tmp" then renames, so readers never see half a file.
void write_file_atomic(const fs::path& path, std::span<const std::uint8_t> bytes);
void write_json_file(const fs::path& path, const nlohmann::json& j);
nlohmann::json read_json_file(const fs::path& path);
std::vector<std::uint8_t> read_file(const fs::path& path);

nlohmann::json profile_to_json(const generation::IdentityProfile& profile);

/// Filesystem persistence: identities/, styles/, jobs/, assets/ under one root.
/// Every persisted object carries a JSON metadata file.
class Workspace {
public:
    explicit Workspace(fs::path root);

    const fs::path& root() const { return root_; }
    fs::path identities_dir() const { return root_ / "identities"; }
    fs::path styles_dir() const { return root_ / "styles"; }
    fs::path jobs_dir() const { return root_ / "jobs"; }
    fs::path assets_dir() const { return root_ / "assets"; }
    fs::path job_dir(const std::string& job_id) const { return jobs_dir() / job_id; }

    /// `base`, or "base-2", "base-3", ... when taken. Reserves the directory.
    std::string reserve_identity_id(const std::string& base);
    void save_identity(const generation::IdentityProfile& profile);
    /// Throws not-found for unknown ids.
    generation::IdentityProfile load_identity(const std::string& id) const;
    bool has_identity(const std::string& id) const;
    /// Ids with a saved profile, sorted.
    std::vector<std::string> list_identities() const;
    nlohmann::json identity_summary(const std::string& id) const;

    struct UploadedFile {
        std::string filename;
        std::vector<std::uint8_t> bytes;
    };
    /// Stores files side by side in a new batch directory (so sidecars stay next
    /// to their image). Returns the asset references "<batch>/<filename>".
    std::vector<std::string> store_upload(std::span<const UploadedFile> files);
    /// Workspace-relative reference -> path. Throws invalid-input for references
    /// escaping the workspace and not-found for missing files.
    fs::path resolve_ref(const std::string& ref) const;

private:
    fs::path root_;
    mutable std::mutex mutex_;
};

}  // namespace portraitgen::service
