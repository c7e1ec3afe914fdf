#include "scomo/http_api.hpp"

#include <cmath>
#include <optional>
#include <vector>

#include <httplib.h>

#include "scomo/error.hpp"
#include "scomo/serialization.hpp"

namespace scomo {

using nlohmann::json;

namespace {

int status_for(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::invalid_argument:
        case ErrorKind::invalid_data: return 400;
        case ErrorKind::not_found: return 404;
        case ErrorKind::protocol: return 409;
        case ErrorKind::numerical:
        case ErrorKind::io: return 500;
    }
    return 500;
}

std::string_view kind_name(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::invalid_argument: return "invalid_argument";
        case ErrorKind::invalid_data: return "invalid_data";
        case ErrorKind::numerical: return "numerical";
        case ErrorKind::protocol: return "protocol";
        case ErrorKind::not_found: return "not_found";
        case ErrorKind::io: return "io";
    }
    return "io";
}

ApiResponse error_response(int status, std::string_view kind, const std::string& message) {
    return {status, {{"error", {{"kind", kind}, {"message", message}}}}};
}

std::vector<std::string> split_path(std::string_view path) {
    std::vector<std::string> parts;
    std::size_t i = 0;
    while (i < path.size()) {
        if (path[i] == '/') {
            ++i;
            continue;
        }
        const auto j = path.find('/', i);
        parts.emplace_back(path.substr(i, j == std::string_view::npos ? std::string_view::npos : j - i));
        if (j == std::string_view::npos) break;
        i = j;
    }
    return parts;
}

json parse_body(const ApiRequest& r) {
    if (r.body.empty()) return json::object();
    try {
        auto j = json::parse(r.body);
        if (!j.is_object()) throw Error(ErrorKind::invalid_argument, "request body must be a JSON object");
        return j;
    } catch (const json::exception& e) {
        throw Error(ErrorKind::invalid_argument, std::string("malformed JSON body: ") + e.what());
    }
}

double parse_position(const std::string& text) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(text, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != text.size() || text.empty()) throw Error(ErrorKind::invalid_argument, "pos must be a number in [0, 1]");
    return v;
}

json slots_payload(const std::string& session_id, const std::vector<DisplaySlot>& slots) {
    json arr = json::array();
    json next = nullptr;
    for (const auto& s : slots) {
        arr.push_back(display_json(s));
        if (!s.selected && next.is_null()) next = s.id;
    }
    return {{"session_id", session_id}, {"next_slot", next}, {"slots", arr}};
}

ApiResponse route(SessionService& svc, const ApiRequest& r) {
    const auto p = split_path(r.path);
    const bool get = r.method == "GET", post = r.method == "POST";
    auto method_not_allowed = [] { return error_response(405, "method_not_allowed", "method not allowed"); };

    if (p.size() == 1 && p[0] == "sessions") {
        if (!post) return method_not_allowed();
        const auto b = parse_body(r);
        const auto s = svc.create_session(b.at("participant_id").get<std::string>(), b.at("day").get<int>(),
                                          b.at("session_index").get<int>());
        return {201, display_json(s)};
    }
    if (p.size() == 3 && p[0] == "sessions") {
        const auto& id = p[1];
        if (p[2] == "trials") {
            if (!post) return method_not_allowed();
            const auto b = parse_body(r);
            TrialInput t;
            if (b.contains("index")) t.index = b.at("index").get<int>();
            if (b.contains("speed_mps")) t.speed_mps = b.at("speed_mps").get<double>();
            t.handrail_free = b.at("handrail_free").get<bool>();
            t.duration_s = b.value("duration_s", kNominalTrialSeconds);
            return {201, display_json(svc.record_trial(id, t))};
        }
        if (p[2] == "speed-request") {
            if (!post) return method_not_allowed();
            const auto b = parse_body(r);
            return {200, display_json(svc.request_speed_change(id, b.at("direction").get<int>()))};
        }
        if (p[2] == "evaluation") {
            if (!post) return method_not_allowed();
            const auto b = parse_body(r);
            EvaluationInput in;
            in.participant_model = participant_model_from_json(b.at("participant_model"));
            if (b.contains("normative_model")) in.normative_model = normative_model_from_json(b.at("normative_model"));
            if (b.contains("gait_params")) in.gait_params = gait_params_from_json(b.at("gait_params"));
            if (b.contains("seed")) in.seed = b.at("seed").get<std::uint64_t>();
            const auto s = svc.begin_evaluation(id, std::move(in));
            auto body = slots_payload(id, svc.display_slots(id));
            body["session"] = display_json(s);
            return {201, body};
        }
        if (p[2] == "slots") {
            if (!get) return method_not_allowed();
            return {200, slots_payload(id, svc.display_slots(id))};
        }
    }
    if (p.size() == 3 && p[0] == "slots") {
        const auto& id = p[1];
        if (p[2] == "frames") {
            if (!get) return method_not_allowed();
            const auto pos = r.query.find("pos");
            if (pos == r.query.end()) throw Error(ErrorKind::invalid_argument, "missing query parameter pos");
            std::optional<ViewKind> view;
            if (const auto v = r.query.find("view"); v != r.query.end() && !v->second.empty())
                view = parse_view(v->second);
            return {200, display_json(svc.frames_for_slot(id, parse_position(pos->second), view))};
        }
        if (p[2] == "selection") {
            if (!post) return method_not_allowed();
            const auto b = parse_body(r);
            const auto s = svc.record_selection_at(id, b.at("pos").get<double>());
            const auto* next = s.evaluation->next_open();
            return {201,
                    {{"slot_id", id},
                     {"status", "selected"},
                     {"next_slot", next ? json(next->id) : json(nullptr)},
                     {"evaluation_complete", s.phase == SessionPhase::complete}}};
        }
    }
    if (p.size() == 3 && p[0] == "participants") {
        const auto& id = p[1];
        if (p[2] == "confidence") {
            if (!post) return method_not_allowed();
            const auto b = parse_body(r);
            std::vector<std::string> cues;
            if (b.contains("cues")) cues = b.at("cues").get<std::vector<std::string>>();
            return {201, display_json(svc.record_confidence(id, b.at("day").get<int>(), b.at("rating").get<int>(),
                                                            std::move(cues)))};
        }
        if (p[2] == "report") {
            if (!get) return method_not_allowed();
            return {200, svc.export_report(id)};
        }
    }
    return error_response(404, "not_found", "no route for " + r.method + " " + r.path);
}

}  // namespace

ApiResponse handle_request(SessionService& service, const ApiRequest& request) {
    try {
        return route(service, request);
    } catch (const Error& e) {
        return error_response(status_for(e.kind()), kind_name(e.kind()), e.what());
    } catch (const json::exception& e) {
        return error_response(400, "invalid_argument", std::string("bad request field: ") + e.what());
    } catch (const std::exception& e) {
        return error_response(500, "internal", e.what());
    }
}

void register_routes(httplib::Server& server, SessionService& service) {
    auto forward = [&service](const httplib::Request& req, httplib::Response& res) {
        ApiRequest r{req.method, req.path, {}, req.body};
        for (const auto& [k, v] : req.params) r.query.emplace(k, v);
        const auto out = handle_request(service, r);
        res.status = out.status;
        res.set_content(out.body.dump(), "application/json");
    };
    server.Get(".*", forward);
    server.Post(".*", forward);
}

}  // namespace scomo
