#pragma once

#include <condition_variable>
#include <cstddef>
#include <deque>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "portraitgen/clock.h"
#include "portraitgen/service/workspace.h"

namespace portraitgen::service {

enum class JobKind { train, generate, inpaint, tryon, talkinghead };
enum class JobState { queued, running, succeeded, failed };

std::string_view to_string(JobKind kind);
std::string_view to_string(JobState state);
JobKind parse_job_kind(std::string_view text);
JobState parse_job_state(std::string_view text);

/// queued -> running -> {succeeded, failed}.
bool is_valid_transition(JobState from, JobState to);

struct JobRecord {
    std::string id;
    JobKind kind = JobKind::train;
    JobState state = JobState::queued;
    std::string created;
    std::optional<std::string> started;
    std::optional<std::string> finished;
    nlohmann::json request = nlohmann::json::object();
    nlohmann::json results = nullptr;
    std::optional<std::string> error_cause;
    std::optional<std::string> error_detail;
    int attempts = 0;       // times a worker picked the job up
    int recoveries = 0;     // times a restart found it running and re-queued it

    /// Throws conflict for transitions outside the state machine.
    void transition(JobState to, TimePoint at);
};

nlohmann::json to_json(const JobRecord& record);
JobRecord job_from_json(const nlohmann::json& j);

/// Runs a job; returns its result references. Throwing fails the job.
using JobHandler = std::function<nlohmann::json(const JobRecord& job, const fs::path& job_dir)>;

/// Persistent queue with a fixed worker pool. State changes are written to
/// jobs/<id>/job.json before they become visible through get()/list().
class JobQueue {
public:
    JobQueue(Workspace& workspace, Clock clock, std::size_t workers = 2);
    ~JobQueue();
    JobQueue(const JobQueue&) = delete;
    JobQueue& operator=(const JobQueue&) = delete;

    void set_handler(JobKind kind, JobHandler handler);

    /// Loads persisted jobs: queued ones are re-enqueued, running ones (left by a
    /// crash) go back to queued once with recoveries incremented. Returns the
    /// number of running jobs recovered. Call before start().
    std::size_t recover();

    std::string submit(JobKind kind, nlohmann::json request);
    void start();
    /// Finishes the job in progress on each worker, leaves the rest queued.
    void stop();
    /// Blocks until nothing is queued or running.
    void wait_idle();

    std::optional<JobRecord> get(const std::string& id) const;
    std::vector<JobRecord> list() const;
    std::size_t worker_count() const { return worker_count_; }

private:
    void worker_loop();
    void run(const std::string& id);
    void persist(const JobRecord& record) const;
    std::string next_id();

    Workspace& workspace_;
    Clock clock_;
    std::size_t worker_count_;
    std::map<JobKind, JobHandler> handlers_;
    std::map<std::string, JobRecord> jobs_;
    std::deque<std::string> pending_;
    std::size_t active_ = 0;
    std::uint64_t next_seq_ = 1;
    bool stopping_ = false;
    bool started_ = false;
    mutable std::mutex mutex_;
    std::condition_variable work_cv_;
    std::condition_variable idle_cv_;
    std::vector<std::thread> threads_;
};

}  // namespace portraitgen::service
