#pragma once

// Network front end for ControlHub: WebSocket /ws plus GET /health, GET /state and
// POST /scenario on one port.

#include "hilsim/service.hpp"

#include <memory>
#include <string>

namespace hilsim {

class Server {
public:
    /// Port 0 binds an ephemeral port; see port().
    Server(ControlHub& hub, std::string address = "127.0.0.1", unsigned short port = 8080);
    ~Server();

    Server(const Server&) = delete;
    Server& operator=(const Server&) = delete;

    void start();
    void stop();
    [[nodiscard]] unsigned short port() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

} // namespace hilsim
