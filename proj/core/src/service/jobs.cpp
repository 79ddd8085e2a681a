#include "portraitgen/service/jobs.h"

#include <algorithm>
#include <cstdio>

#include "portraitgen/error.h"

namespace portraitgen::service {

std::string_view to_string(JobKind kind) {
    switch (kind) {
        case JobKind::train: return "train";
        case JobKind::generate: return "generate";
        case JobKind::inpaint: return "inpaint";
        case JobKind::tryon: return "tryon";
        case JobKind::talkinghead: return "talkinghead";
    }
    return "train";
}

std::string_view to_string(JobState state) {
    switch (state) {
        case JobState::queued: return "queued";
        case JobState::running: return "running";
        case JobState::succeeded: return "succeeded";
        case JobState::failed: return "failed";
    }
    return "queued";
}

JobKind parse_job_kind(std::string_view text) {
    for (auto k : {JobKind::train, JobKind::generate, JobKind::inpaint, JobKind::tryon, JobKind::talkinghead}) {
        if (to_string(k) == text) return k;
    }
    throw Error(ErrorCode::invalid_input, "unknown job kind '" + std::string(text) + "'");
}

JobState parse_job_state(std::string_view text) {
    for (auto s : {JobState::queued, JobState::running, JobState::succeeded, JobState::failed}) {
        if (to_string(s) == text) return s;
    }
    throw Error(ErrorCode::invalid_input, "unknown job state '" + std::string(text) + "'");
}

bool is_valid_transition(JobState from, JobState to) {
    switch (from) {
        case JobState::queued: return to == JobState::running;
        case JobState::running: return to == JobState::succeeded || to == JobState::failed;
        case JobState::succeeded:
        case JobState::failed: return false;
    }
    return false;
}

void JobRecord::transition(JobState to, TimePoint at) {
    if (!is_valid_transition(state, to)) {
        throw Error(ErrorCode::conflict, "job " + id + " cannot go from " + std::string(to_string(state)) + " to " +
                                             std::string(to_string(to)));
    }
    // Timestamps never run backwards even if the clock does.
    const auto floor = [&](const std::string& earlier) {
        return earlier.empty() ? at : std::max(at, parse_iso8601(earlier));
    };
    if (to == JobState::running) {
        started = iso8601(floor(created));
    } else {
        finished = iso8601(floor(started.value_or(created)));
    }
    state = to;
}

nlohmann::json to_json(const JobRecord& r) {
    auto opt = [](const std::optional<std::string>& s) { return s ? nlohmann::json(*s) : nlohmann::json(nullptr); };
    nlohmann::json error = nullptr;
    if (r.error_cause) {
        error = {{"cause", *r.error_cause}, {"detail", r.error_detail.value_or("")}};
    }
    return {{"id", r.id},
            {"kind", to_string(r.kind)},
            {"state", to_string(r.state)},
            {"created", r.created},
            {"started", opt(r.started)},
            {"finished", opt(r.finished)},
            {"request", r.request},
            {"results", r.results},
            {"error", error},
            {"attempts", r.attempts},
            {"recoveries", r.recoveries}};
}

JobRecord job_from_json(const nlohmann::json& j) {
    auto opt = [&](const char* key) -> std::optional<std::string> {
        if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
        return j.at(key).get<std::string>();
    };
    JobRecord r;
    try {
        r.id = j.at("id").get<std::string>();
        r.kind = parse_job_kind(j.at("kind").get<std::string>());
        r.state = parse_job_state(j.at("state").get<std::string>());
        r.created = j.at("created").get<std::string>();
        r.started = opt("started");
        r.finished = opt("finished");
        r.request = j.value("request", nlohmann::json::object());
        r.results = j.value("results", nlohmann::json(nullptr));
        if (j.contains("error") && !j.at("error").is_null()) {
            r.error_cause = j.at("error").at("cause").get<std::string>();
            r.error_detail = j.at("error").value("detail", std::string());
        }
        r.attempts = j.value("attempts", 0);
        r.recoveries = j.value("recoveries", 0);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::io, std::string("corrupt job record: ") + e.what());
    }
    return r;
}

JobQueue::JobQueue(Workspace& workspace, Clock clock, std::size_t workers)
    : workspace_(workspace), clock_(std::move(clock)), worker_count_(std::max<std::size_t>(1, workers)) {}

JobQueue::~JobQueue() { stop(); }

void JobQueue::set_handler(JobKind kind, JobHandler handler) {
    std::lock_guard lock(mutex_);
    handlers_[kind] = std::move(handler);
}

void JobQueue::persist(const JobRecord& record) const {
    write_json_file(workspace_.job_dir(record.id) / "job.json", to_json(record));
}

std::size_t JobQueue::recover() {
    std::lock_guard lock(mutex_);
    if (started_) {
        throw Error(ErrorCode::conflict, "recover() must run before the workers start");
    }
    std::vector<JobRecord> loaded;
    for (const auto& entry : fs::directory_iterator(workspace_.jobs_dir())) {
        const auto file = entry.path() / "job.json";
        if (entry.is_directory() && fs::exists(file)) {
            loaded.push_back(job_from_json(read_json_file(file)));
        }
    }
    std::sort(loaded.begin(), loaded.end(), [](const JobRecord& a, const JobRecord& b) { return a.id < b.id; });
    std::size_t recovered = 0;
    for (auto& job : loaded) {
        unsigned long long seq = 0;
        if (std::sscanf(job.id.c_str(), "job-%llu", &seq) == 1) {
            next_seq_ = std::max<std::uint64_t>(next_seq_, seq + 1);
        }
        if (jobs_.contains(job.id)) {
            continue;
        }
        if (job.state == JobState::running) {
            // The only way back to queued: a restart finding a job mid-flight.
            job.state = JobState::queued;
            job.started.reset();
            ++job.recoveries;
            persist(job);
            ++recovered;
        }
        if (job.state == JobState::queued) {
            pending_.push_back(job.id);
        }
        jobs_.emplace(job.id, std::move(job));
    }
    return recovered;
}

std::string JobQueue::next_id() {
    char buf[32];
    std::snprintf(buf, sizeof buf, "job-%06llu", static_cast<unsigned long long>(next_seq_++));
    return buf;
}

std::string JobQueue::submit(JobKind kind, nlohmann::json request) {
    std::unique_lock lock(mutex_);
    JobRecord record;
    record.id = next_id();
    while (fs::exists(workspace_.job_dir(record.id))) {
        record.id = next_id();
    }
    record.kind = kind;
    record.created = iso8601(clock_());
    record.request = std::move(request);
    persist(record);
    jobs_.emplace(record.id, record);
    pending_.push_back(record.id);
    work_cv_.notify_one();
    return record.id;
}

void JobQueue::start() {
    std::lock_guard lock(mutex_);
    if (started_) return;
    started_ = true;
    stopping_ = false;
    for (std::size_t i = 0; i < worker_count_; ++i) {
        threads_.emplace_back([this] { worker_loop(); });
    }
}

void JobQueue::stop() {
    {
        std::lock_guard lock(mutex_);
        if (!started_) return;
        stopping_ = true;
    }
    work_cv_.notify_all();
    for (auto& t : threads_) {
        if (t.joinable()) t.join();
    }
    threads_.clear();
    std::lock_guard lock(mutex_);
    started_ = false;
    idle_cv_.notify_all();
}

void JobQueue::wait_idle() {
    std::unique_lock lock(mutex_);
    idle_cv_.wait(lock, [&] { return (pending_.empty() || !started_) && active_ == 0; });
}

std::optional<JobRecord> JobQueue::get(const std::string& id) const {
    std::lock_guard lock(mutex_);
    const auto it = jobs_.find(id);
    if (it == jobs_.end()) return std::nullopt;
    return it->second;
}

std::vector<JobRecord> JobQueue::list() const {
    std::lock_guard lock(mutex_);
    std::vector<JobRecord> out;
    for (const auto& [id, job] : jobs_) out.push_back(job);
    return out;
}

void JobQueue::worker_loop() {
    for (;;) {
        std::string id;
        {
            std::unique_lock lock(mutex_);
            work_cv_.wait(lock, [&] { return stopping_ || !pending_.empty(); });
            if (stopping_) return;
            id = pending_.front();
            pending_.pop_front();
            ++active_;
        }
        run(id);
        {
            std::lock_guard lock(mutex_);
            --active_;
            if (pending_.empty() && active_ == 0) idle_cv_.notify_all();
        }
    }
}

void JobQueue::run(const std::string& id) {
    JobRecord snapshot;
    JobHandler handler;
    {
        std::lock_guard lock(mutex_);
        auto& job = jobs_.at(id);
        JobRecord next = job;
        next.transition(JobState::running, clock_());
        ++next.attempts;
        persist(next);
        job = next;
        snapshot = next;
        const auto h = handlers_.find(job.kind);
        if (h != handlers_.end()) handler = h->second;
    }
    nlohmann::json results = nullptr;
    std::optional<std::pair<std::string, std::string>> failure;
    if (!handler) {
        failure = {"internal", "no handler for job kind " + std::string(to_string(snapshot.kind))};
    } else {
        try {
            results = handler(snapshot, workspace_.job_dir(id));
        } catch (const Error& e) {
            failure = {std::string(e.cause()), e.detail()};
        } catch (const std::exception& e) {
            failure = {"internal", e.what()};
        } catch (...) {
            failure = {"internal", "unknown failure"};
        }
    }
    std::lock_guard lock(mutex_);
    auto& job = jobs_.at(id);
    JobRecord next = job;
    next.transition(failure ? JobState::failed : JobState::succeeded, clock_());
    if (failure) {
        next.error_cause = failure->first;
        next.error_detail = failure->second;
    } else {
        next.results = std::move(results);
    }
    persist(next);
    job = std::move(next);
}

}  // namespace portraitgen::service
