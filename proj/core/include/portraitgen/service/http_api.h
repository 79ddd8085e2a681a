#pragma once

#include <memory>
#include <string>

#include <nlohmann/json.hpp>

#include "portraitgen/error.h"
#include "portraitgen/service/service.h"

namespace portraitgen::service {

/// HTTP status for a failure cause: 400 bad request, 404 unknown id, 409 conflict,
/// 422 failed precondition, 500 for io/internal.
int http_status_for(ErrorCode code);

/// {"error": {"cause": "<name>", "message": "<detail>"}}
nlohmann::json error_body(ErrorCode code, const std::string& message);

/// JSON API over a Service. Long-running work answers 202 with the queued job record.
class HttpServer {
public:
    explicit HttpServer(Service& service);
    ~HttpServer();
    HttpServer(const HttpServer&) = delete;
    HttpServer& operator=(const HttpServer&) = delete;

    /// Binds; port 0 picks a free port. Returns the bound port. Throws io on failure.
    int bind(const std::string& host, int port);
    /// Serves until stop(). Requires bind().
    void listen();
    /// bind() must have been called; serves on a background thread.
    void start();
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// Port from PORTRAITGEN_PORT, else kDefaultPort.
int port_from_environment();

}  // namespace portraitgen::service
