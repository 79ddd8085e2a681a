#include "portraitgen/service/http_api.h"

#include <cstdlib>
#include <thread>

#include <httplib.h>

#include "portraitgen/generation.h"

namespace portraitgen::service {

using nlohmann::json;

int http_status_for(ErrorCode code) {
    switch (code) {
        case ErrorCode::invalid_input:
        case ErrorCode::out_of_range:
        case ErrorCode::invalid_config:
        case ErrorCode::audio_decode:
            return 400;
        case ErrorCode::not_found:
        case ErrorCode::resolution:
            return 404;
        case ErrorCode::conflict:
            return 409;
        case ErrorCode::empty_training_set:
        case ErrorCode::constraint_infeasible:
        case ErrorCode::overlap:
        case ErrorCode::no_face:
        case ErrorCode::incompatible:
        case ErrorCode::degenerate_landmarks:
        case ErrorCode::fixture_missing:
        case ErrorCode::stage1_failure:
        case ErrorCode::backend_unavailable:
            return 422;
        case ErrorCode::io:
        case ErrorCode::internal:
            return 500;
    }
    return 500;
}

json error_body(ErrorCode code, const std::string& message) {
    return {{"error", {{"cause", std::string(error_code_name(code))}, {"message", message}}}};
}

int port_from_environment() {
    const char* env = std::getenv(kPortEnv);
    if (env == nullptr || *env == '\0') return kDefaultPort;
    char* end = nullptr;
    const long port = std::strtol(env, &end, 10);
    if (*end != '\0' || port < 0 || port > 65535) {
        throw Error(ErrorCode::invalid_config, std::string(kPortEnv) + " is not a port: '" + env + "'");
    }
    return static_cast<int>(port);
}

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(2) + "\n", "application/json");
}

void send_error(httplib::Response& res, ErrorCode code, const std::string& message) {
    send_json(res, http_status_for(code), error_body(code, message));
}

json parse_body(const httplib::Request& req) {
    if (req.body.empty()) {
        throw Error(ErrorCode::invalid_input, "request body is empty");
    }
    json j = json::parse(req.body, nullptr, false);
    if (j.is_discarded()) {
        throw Error(ErrorCode::invalid_input, "request body is not valid JSON");
    }
    if (!j.is_object()) {
        throw Error(ErrorCode::invalid_input, "request body must be a JSON object");
    }
    return j;
}

std::vector<Workspace::UploadedFile> uploaded_files(const httplib::Request& req) {
    std::vector<Workspace::UploadedFile> out;
    for (const auto& [field, part] : req.files) {
        if (part.filename.empty()) continue;
        out.push_back({part.filename, std::vector<std::uint8_t>(part.content.begin(), part.content.end())});
    }
    return out;
}

std::string content_type_for(const fs::path& path) {
    const auto ext = path.extension().string();
    if (ext == ".png") return "image/png";
    if (ext == ".json") return "application/json";
    if (ext == ".wav") return "audio/wav";
    return "application/octet-stream";
}

void send_file(httplib::Response& res, const fs::path& path) {
    const auto bytes = read_file(path);
    res.status = 200;
    res.set_content(std::string(bytes.begin(), bytes.end()), content_type_for(path));
}

bool plain_name(const std::string& name) {
    return !name.empty() && name != "." && name != ".." && name.find('/') == std::string::npos &&
           name.find('\\') == std::string::npos;
}

}  // namespace

struct HttpServer::Impl {
    Service& service;
    httplib::Server server;
    std::thread thread;
    bool bound = false;

    explicit Impl(Service& s) : service(s) { routes(); }

    // Wraps a handler so Error maps onto the status table.
    template <class F>
    httplib::Server::Handler guarded(F f) {
        return [f = std::move(f)](const httplib::Request& req, httplib::Response& res) {
            try {
                f(req, res);
            } catch (const Error& e) {
                send_error(res, e.code(), e.detail());
            } catch (const json::exception& e) {
                send_error(res, ErrorCode::invalid_input, e.what());
            } catch (const std::exception& e) {
                send_error(res, ErrorCode::internal, e.what());
            }
        };
    }

    std::string submit(JobKind kind, const json& request) {
        switch (kind) {
            case JobKind::train: return service.submit_train(request);
            case JobKind::generate: return service.submit_generate(request);
            case JobKind::inpaint: return service.submit_inpaint(request);
            case JobKind::tryon: return service.submit_tryon(request);
            case JobKind::talkinghead: return service.submit_talkinghead(request);
        }
        throw Error(ErrorCode::internal, "unhandled job kind");
    }

    void accepted(httplib::Response& res, const std::string& job_id) {
        res.set_header("Location", "/jobs/" + job_id);
        send_json(res, 202, to_json(*service.jobs().get(job_id)));
    }

    void job_route(const std::string& path, JobKind kind) {
        server.Post(path, guarded([this, kind](const httplib::Request& req, httplib::Response& res) {
            accepted(res, submit(kind, parse_body(req)));
        }));
    }

    void routes() {
        server.Get("/health", guarded([](const httplib::Request&, httplib::Response& res) {
            send_json(res, 200, {{"status", "ok"}});
        }));

        server.Get("/backends", guarded([this](const httplib::Request&, httplib::Response& res) {
            send_json(res, 200, {{"backends", service.backends().to_manifest()}});
        }));

        server.Post("/assets", guarded([this](const httplib::Request& req, httplib::Response& res) {
            if (!req.is_multipart_form_data()) {
                throw Error(ErrorCode::invalid_input, "expected multipart/form-data");
            }
            const auto files = uploaded_files(req);
            send_json(res, 201, {{"assets", service.workspace().store_upload(files)}});
        }));

        // Multipart images (stored as one asset batch), or JSON {"images": [refs]}.
        server.Post("/identities", guarded([this](const httplib::Request& req, httplib::Response& res) {
            json request;
            if (req.is_multipart_form_data()) {
                const auto files = uploaded_files(req);
                if (files.empty()) {
                    throw Error(ErrorCode::empty_training_set, "no images uploaded");
                }
                request["images"] = service.workspace().store_upload(files);
                if (req.has_param("identity")) request["identity"] = req.get_param_value("identity");
                if (req.has_file("identity")) request["identity"] = req.get_file_value("identity").content;
            } else {
                request = parse_body(req);
            }
            accepted(res, service.submit_train(request));
        }));

        server.Get("/identities", guarded([this](const httplib::Request&, httplib::Response& res) {
            json list = json::array();
            for (const auto& id : service.workspace().list_identities()) {
                list.push_back(service.workspace().identity_summary(id));
            }
            send_json(res, 200, {{"identities", list}});
        }));

        server.Get(R"(/identities/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
            const std::string id = req.matches[1];
            if (!plain_name(id) || !service.workspace().has_identity(id)) {
                throw Error(ErrorCode::not_found, "unknown identity '" + id + "'");
            }
            send_json(res, 200, read_json_file(service.workspace().identities_dir() / id / "profile.json"));
        }));

        server.Get(R"(/identities/([^/]+)/faces/([^/]+))",
                   guarded([this](const httplib::Request& req, httplib::Response& res) {
                       const std::string id = req.matches[1];
                       const std::string name = req.matches[2];
                       const auto path = service.workspace().identities_dir() / id / "faces" / name;
                       if (!plain_name(id) || !plain_name(name) || !service.workspace().has_identity(id) ||
                           !fs::is_regular_file(path)) {
                           throw Error(ErrorCode::not_found, "no face image '" + name + "' for '" + id + "'");
                       }
                       send_file(res, path);
                   }));

        job_route("/generations", JobKind::generate);
        job_route("/inpaint", JobKind::inpaint);
        job_route("/tryon", JobKind::tryon);
        job_route("/talkinghead", JobKind::talkinghead);

        server.Get("/jobs", guarded([this](const httplib::Request&, httplib::Response& res) {
            json list = json::array();
            for (const auto& job : service.jobs().list()) list.push_back(to_json(job));
            send_json(res, 200, {{"jobs", list}});
        }));

        server.Get(R"(/jobs/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
            const std::string id = req.matches[1];
            const auto job = service.jobs().get(id);
            if (!job) throw Error(ErrorCode::not_found, "unknown job '" + id + "'");
            send_json(res, 200, to_json(*job));
        }));

        server.Get(R"(/jobs/([^/]+)/results)", guarded([this](const httplib::Request& req, httplib::Response& res) {
            send_json(res, 200, service.job_results(req.matches[1]));
        }));

        server.Get(R"(/jobs/([^/]+)/files/([^/]+))",
                   guarded([this](const httplib::Request& req, httplib::Response& res) {
                       const std::string id = req.matches[1];
                       const std::string name = req.matches[2];
                       const auto results = service.job_results(id);
                       bool listed = name == "manifest.json";
                       for (const auto& f : results.at("files")) listed = listed || f.get<std::string>() == name;
                       if (!listed) {
                           throw Error(ErrorCode::not_found, "job " + id + " has no file '" + name + "'");
                       }
                       send_file(res, service.workspace().job_dir(id) / name);
                   }));

        server.Get("/styles", guarded([this](const httplib::Request&, httplib::Response& res) {
            auto& styles = service.styles();
            styles.rescan();
            json list = json::array();
            for (const auto& s : styles.list()) list.push_back(styles::to_json(s));
            json skipped = json::array();
            for (const auto& s : styles.skipped()) {
                skipped.push_back({{"path", s.path.filename().string()}, {"reason", s.reason}});
            }
            send_json(res, 200, {{"styles", list}, {"skipped", skipped}});
        }));

        server.Post("/styles", guarded([this](const httplib::Request& req, httplib::Response& res) {
            send_json(res, 201, styles::to_json(service.add_style(parse_body(req))));
        }));

        server.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
            if (res.body.empty()) {
                const auto code = res.status == 404 ? ErrorCode::not_found : ErrorCode::invalid_input;
                const int status = res.status;
                send_error(res, code, "no route for " + req.method + " " + req.path);
                res.status = status;
            }
        });
    }
};

HttpServer::HttpServer(Service& service) : impl_(std::make_unique<Impl>(service)) {}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
    int bound = port;
    if (port == 0) {
        bound = impl_->server.bind_to_any_port(host);
    } else if (!impl_->server.bind_to_port(host, port)) {
        bound = -1;
    }
    if (bound < 0) {
        throw Error(ErrorCode::io, "cannot bind " + host + ":" + std::to_string(port));
    }
    impl_->bound = true;
    return bound;
}

void HttpServer::listen() {
    if (!impl_->bound) throw Error(ErrorCode::internal, "listen() before bind()");
    impl_->server.listen_after_bind();
}

void HttpServer::start() {
    if (!impl_->bound) throw Error(ErrorCode::internal, "start() before bind()");
    impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
}

void HttpServer::stop() {
    if (!impl_) return;
    impl_->server.stop();
    if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace portraitgen::service
