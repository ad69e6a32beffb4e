#pragma once

// JSON-over-HTTP front end for SessionManager, with a server-sent-events
// sample stream. Field names are documented in docs/openapi.json.

#include "asmwb/service.hpp"

#include <memory>
#include <string>

namespace asmwb {

class HttpService {
public:
    explicit HttpService(SessionManager& sessions);
    ~HttpService();
    HttpService(const HttpService&) = delete;
    HttpService& operator=(const HttpService&) = delete;

    /// Binds without serving; port 0 picks a free port. Returns the port,
    /// or -1 when binding fails.
    int bind(const std::string& host, int port);
    /// Serves until stop(); call after bind().
    bool serve();
    void stop();
    /// Blocks until serve() is accepting connections.
    void wait_until_ready() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

} // namespace asmwb
