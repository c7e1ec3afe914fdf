#pragma once

// HTTP/JSON surface of the session service. Routing and payload handling are
// transport-free; `register_routes` binds them to a cpp-httplib server.

#include <array>
#include <map>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "scomo/session.hpp"

namespace httplib {
class Server;
}

namespace scomo {

struct ApiRequest {
    std::string method;  // "GET" or "POST"
    std::string path;
    std::map<std::string, std::string> query;
    std::string body;
};

struct ApiResponse {
    int status = 200;
    nlohmann::json body;
};

struct Endpoint {
    std::string_view method;
    std::string_view path;
    bool display_channel;  // payload goes to the participant-facing display
};

inline constexpr std::array<Endpoint, 9> kEndpoints = {{
    {"POST", "/sessions", true},
    {"POST", "/sessions/{id}/trials", true},
    {"POST", "/sessions/{id}/speed-request", true},
    {"POST", "/sessions/{id}/evaluation", true},
    {"GET", "/sessions/{id}/slots", true},
    {"GET", "/slots/{id}/frames", true},
    {"POST", "/slots/{id}/selection", true},
    {"POST", "/participants/{id}/confidence", true},
    {"GET", "/participants/{id}/report", false},  // analysis export for the experimenter
}};

ApiResponse handle_request(SessionService& service, const ApiRequest& request);

void register_routes(httplib::Server& server, SessionService& service);

}  // namespace scomo
