#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "portraitgen/backends.h"
#include "portraitgen/clock.h"
#include "portraitgen/generation.h"
#include "portraitgen/service/jobs.h"
#include "portraitgen/service/workspace.h"
#include "portraitgen/styles.h"

namespace portraitgen::service {

inline constexpr const char* kWorkspaceEnv = "PORTRAITGEN_WORKSPACE";
inline constexpr const char* kPortEnv = "PORTRAITGEN_PORT";
inline constexpr int kDefaultPort = 8710;
inline constexpr std::size_t kDefaultWorkers = 2;

struct ServiceConfig {
    fs::path workspace;
    /// Backend manifest; unset falls back to PORTRAITGEN_BACKEND_MANIFEST, then stubs.
    std::optional<fs::path> backend_manifest;
    std::size_t workers = kDefaultWorkers;
    Clock clock = system_clock();
    bool start_workers = true;
    /// Accept absolute file paths in requests (CLI); the HTTP API only takes workspace references.
    bool allow_absolute_paths = false;
};

/// Pipelines behind a persistent job queue. submit_* validate synchronously
/// (throwing Error) and return a job id; the work happens on the queue.
class Service {
public:
    explicit Service(ServiceConfig config);
    ~Service();
    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    Workspace& workspace() { return workspace_; }
    JobQueue& jobs() { return *jobs_; }
    const backends::BackendRegistry& backends() const { return registry_; }
    styles::StyleRegistry& styles() { return *styles_; }
    const lora::ModelWeights& base_model() const { return base_; }
    const ServiceConfig& config() const { return config_; }
    /// Running jobs re-queued at startup.
    std::size_t recovered_jobs() const { return recovered_; }

    /// {"images": [refs], "identity": optional id}
    std::string submit_train(const nlohmann::json& request);
    /// GenerationRequest JSON.
    std::string submit_generate(const nlohmann::json& request);
    /// {"identities": [ids], "template": ref, "strength", "seed", "compensate", "expansion_radius",
    ///  "face_weight", "prompt_extra", "max_attempts"}
    std::string submit_inpaint(const nlohmann::json& request);
    /// {"template": ref, "mask": ref, "identity", "prompt", "seed", "refine"}
    std::string submit_tryon(const nlohmann::json& request);
    /// {"portrait": ref, "audio": {"kind": "tts"|"file"|"recording", "text", "voice", "ref"},
    ///  "resolution", "pose_index", "expression_scale", "blink_rate", "upscale"}
    std::string submit_talkinghead(const nlohmann::json& request);

    /// Throws not-found for unknown jobs and conflict for jobs that have not succeeded.
    nlohmann::json job_results(const std::string& job_id) const;
    std::shared_ptr<const generation::IdentityProfile> identity(const std::string& id);

    /// Validates and writes a style descriptor into the workspace.
    styles::StyleSpec add_style(const nlohmann::json& descriptor);

    void wait_idle() { jobs_->wait_idle(); }

private:
    fs::path resolve_input(const std::string& ref) const;
    nlohmann::json run_train(const JobRecord& job, const fs::path& dir);
    nlohmann::json run_generate(const JobRecord& job, const fs::path& dir);
    nlohmann::json run_inpaint(const JobRecord& job, const fs::path& dir);
    nlohmann::json run_tryon(const JobRecord& job, const fs::path& dir);
    nlohmann::json run_talkinghead(const JobRecord& job, const fs::path& dir);

    ServiceConfig config_;
    Workspace workspace_;
    backends::BackendRegistry registry_;
    lora::ModelWeights base_;
    std::unique_ptr<styles::StyleRegistry> styles_;
    std::unique_ptr<JobQueue> jobs_;
    std::size_t recovered_ = 0;
    std::map<std::string, std::shared_ptr<const generation::IdentityProfile>> profiles_;
    std::mutex profiles_mutex_;
};

/// Workspace path from PORTRAITGEN_WORKSPACE, else "./portraitgen-workspace".
fs::path workspace_from_environment();

}  // namespace portraitgen::service
