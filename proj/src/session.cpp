#include "scomo/session.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <random>
#include <sstream>

#include "scomo/error.hpp"
#include "scomo/serialization.hpp"

namespace scomo {

using nlohmann::json;

// Divide rather than multiply by 0.05 so 6 steps prints as 0.3.
double speed_mps(int steps) { return steps / 20.0; }

int speed_steps(double mps) {
    const double steps = mps / kSpeedStepMps;
    const double rounded = std::round(steps);
    if (!std::isfinite(mps) || std::abs(mps - rounded * kSpeedStepMps) > 1e-9)
        throw Error(ErrorKind::invalid_argument, "speed must be a multiple of 0.05 m/s");
    if (rounded < 0) throw Error(ErrorKind::invalid_argument, "speed must not be negative");
    return static_cast<int>(rounded);
}

int session_number(int day, int session_index) { return (day - 1) * kSessionsPerDay + session_index; }

std::string session_id(std::string_view participant_id, int day, int session_index) {
    return std::string(participant_id) + "-d" + std::to_string(day) + "-s" + std::to_string(session_index);
}

std::string slot_id(std::string_view session_id, ViewKind view, int repeat_index) {
    return std::string(session_id) + "." + std::string(to_string(view)) + "." + std::to_string(repeat_index);
}

std::string_view to_string(SessionPhase phase) {
    switch (phase) {
        case SessionPhase::training: return "training";
        case SessionPhase::evaluation: return "evaluation";
        case SessionPhase::complete: return "complete";
    }
    return "training";
}

namespace {

struct SessionKey {
    std::string participant_id;
    int day = 0;
    int index = 0;
};

std::optional<SessionKey> parse_session_id(std::string_view id) {
    const auto d = id.rfind("-d");
    const auto s = id.rfind("-s");
    if (d == std::string_view::npos || s == std::string_view::npos || s < d || d == 0) return std::nullopt;
    try {
        std::size_t used = 0;
        const std::string day(id.substr(d + 2, s - d - 2));
        const std::string idx(id.substr(s + 2));
        SessionKey key{std::string(id.substr(0, d)), std::stoi(day, &used), 0};
        if (used != day.size()) return std::nullopt;
        key.index = std::stoi(idx, &used);
        if (used != idx.size()) return std::nullopt;
        return key;
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

std::string participant_of_slot(std::string_view slot) {
    const auto dot = slot.find('.');
    const auto key = parse_session_id(slot.substr(0, dot));
    if (dot == std::string_view::npos || !key)
        throw Error(ErrorKind::not_found, "unknown slot '" + std::string(slot) + "'");
    return key->participant_id;
}

bool valid_participant_id(std::string_view id) {
    return !id.empty() && id.size() <= 64 && std::all_of(id.begin(), id.end(), [](char c) {
        return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_' || c == '-';
    });
}

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// --- JSON forms used by the event log ------------------------------------

json trial_json(const Trial& t) {
    return {{"index", t.index}, {"speed_steps", t.speed_steps}, {"handrail_free", t.handrail_free},
            {"duration_s", t.duration_s}};
}

Trial trial_from(const json& j) {
    return {j.at("index").get<int>(), j.at("speed_steps").get<int>(), j.at("handrail_free").get<bool>(),
            j.at("duration_s").get<double>()};
}

json slider_json(const SliderConfig& s) {
    return {{"min_alpha", s.min_alpha}, {"max_alpha", s.max_alpha}, {"initial_alpha", s.initial_alpha},
            {"seed", s.seed}};
}

SliderConfig slider_from(const json& j) {
    return {j.at("min_alpha").get<double>(), j.at("max_alpha").get<double>(), j.at("initial_alpha").get<double>(),
            j.at("seed").get<std::uint64_t>()};
}

json decision_json(const SpeedDecision& d) {
    return {{"direction", d.direction}, {"granted", d.granted},     {"speed_before", d.speed_before},
            {"speed_after", d.speed_after}, {"block", d.block}, {"reason", d.reason}};
}

SpeedDecision decision_from(const json& j) {
    return {j.at("direction").get<int>(), j.at("granted").get<bool>(), j.at("speed_before").get<int>(),
            j.at("speed_after").get<int>(), j.at("block").get<std::size_t>(), j.at("reason").get<std::string>()};
}

json deviation_json(const DeviationValue& d) { return {{"mode", to_string(d.mode)}, {"value", d.value}, {"m", d.m}}; }

DeviationValue deviation_from(const json& j) {
    return {parse_deviation_mode(j.at("mode").get<std::string>()), j.at("value").get<double>(),
            j.at("m").get<std::size_t>()};
}

std::vector<SelectionSummary> summarize_plan(const EvaluationPlan& plan) {
    std::vector<SelectionSummary> out;
    for (ViewKind v : kAllViews) {
        std::vector<double> values;
        for (const auto& slot : plan.slots)
            if (slot.view == v && slot.alpha1) values.push_back(*slot.alpha1);
        out.push_back(summarize_selections(values, ViewingAngle{v}));
    }
    return out;
}

ExperimentSession& session_or_throw(ParticipantRecord& r, const std::string& id) {
    auto* s = r.find(id);
    if (!s) throw Error(ErrorKind::invalid_data, "event refers to unknown session " + id);
    return *s;
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
    std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

double SliderConfig::alpha_at(double position) const { return min_alpha + position * (max_alpha - min_alpha); }

double SliderConfig::position_of(double alpha1) const { return (alpha1 - min_alpha) / (max_alpha - min_alpha); }

SliderConfig make_slider_config(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    SliderConfig s;
    s.seed = seed;
    s.min_alpha = kSliderMinLow + (kSliderMinHigh - kSliderMinLow) * uniform01(rng);
    s.max_alpha = kSliderMaxLow + (kSliderMaxHigh - kSliderMaxLow) * uniform01(rng);
    s.initial_alpha = s.alpha_at(uniform01(rng));
    return s;
}

std::size_t EvaluationPlan::selected_count() const {
    return static_cast<std::size_t>(
        std::count_if(slots.begin(), slots.end(), [](const SelectionSlot& s) { return s.alpha1.has_value(); }));
}

const SelectionSlot* EvaluationPlan::next_open() const {
    for (const auto& s : slots)
        if (!s.alpha1) return &s;
    return nullptr;
}

SpeedDecision decide_speed_change(int day, int direction, std::span<const Trial> block, int current_steps) {
    if (day < 2) throw Error(ErrorKind::protocol, "speed change requests start on day 2");
    if (direction < -1 || direction > 1) throw Error(ErrorKind::invalid_argument, "direction must be -1, 0 or +1");
    if (block.size() != kTrialsPerBlock)
        throw Error(ErrorKind::protocol, "speed change needs a complete block of three trials");
    SpeedDecision d;
    d.direction = direction;
    d.speed_before = current_steps;
    d.speed_after = current_steps;
    const auto free = std::count_if(block.begin(), block.end(), [](const Trial& t) { return t.handrail_free; });
    if (direction > 0) {
        d.granted = free >= 2;
        if (d.granted) d.speed_after = current_steps + 1;
        d.reason = d.granted ? "increase granted: " + std::to_string(free) + " of 3 trials handrail-free"
                             : "increase denied: " + std::to_string(free) + " of 3 trials handrail-free";
    } else if (direction < 0) {
        d.granted = current_steps > 0;
        if (d.granted) d.speed_after = current_steps - 1;
        d.reason = d.granted ? "decrease granted" : "decrease denied: speed already 0";
    } else {
        d.granted = true;
        d.reason = "speed maintained";
    }
    return d;
}

const ExperimentSession* ParticipantRecord::find(std::string_view id) const {
    for (const auto& s : sessions)
        if (s.id == id) return &s;
    return nullptr;
}

ExperimentSession* ParticipantRecord::find(std::string_view id) {
    for (auto& s : sessions)
        if (s.id == id) return &s;
    return nullptr;
}

void apply_event(ParticipantRecord& r, const json& e) {
    try {
        const auto type = e.at("type").get<std::string>();
        if (type == "session_created") {
            ExperimentSession s;
            s.participant_id = r.id;
            s.day = e.at("day").get<int>();
            s.session_index = e.at("session_index").get<int>();
            s.id = session_id(r.id, s.day, s.session_index);
            s.start_speed_steps = s.speed_steps = e.at("speed_steps").get<int>();
            const auto pos = std::find_if(r.sessions.begin(), r.sessions.end(), [&](const ExperimentSession& o) {
                return o.number() > s.number();
            });
            r.sessions.insert(pos, std::move(s));
        } else if (type == "trial_recorded") {
            auto& s = session_or_throw(r, e.at("session_id").get<std::string>());
            const Trial t = trial_from(e.at("trial"));
            s.trials.push_back(t);
            if (s.day == 1 && t.index % static_cast<int>(kTrialsPerBlock) == 0 && s.speed_steps < kDay1MaxSpeedSteps)
                ++s.speed_steps;
            if (s.trials.size() == kTrialsPerSession) s.phase = SessionPhase::evaluation;
        } else if (type == "speed_decision") {
            auto& s = session_or_throw(r, e.at("session_id").get<std::string>());
            s.speed_decisions.push_back(decision_from(e.at("decision")));
            s.speed_steps = s.speed_decisions.back().speed_after;
        } else if (type == "evaluation_started") {
            auto& s = session_or_throw(r, e.at("session_id").get<std::string>());
            EvaluationPlan plan;
            plan.seed = e.at("seed").get<std::uint64_t>();
            for (const auto& js : e.at("slots")) {
                SelectionSlot slot;
                slot.id = js.at("id").get<std::string>();
                slot.view = parse_view(js.at("view").get<std::string>());
                slot.repeat_index = js.at("repeat_index").get<int>();
                slot.slider = slider_from(js.at("slider"));
                plan.slots.push_back(std::move(slot));
            }
            plan.participant_model = participant_model_from_json(e.at("participant_model"));
            plan.normative_model = normative_model_from_json(e.at("normative_model"));
            plan.deviation = deviation_from(e.at("deviation"));
            if (e.contains("gait_params") && !e.at("gait_params").is_null())
                plan.gait_params = gait_params_from_json(e.at("gait_params"));
            s.evaluation = std::move(plan);
        } else if (type == "selection_recorded") {
            auto& s = session_or_throw(r, e.at("session_id").get<std::string>());
            if (!s.evaluation) throw Error(ErrorKind::invalid_data, "selection before evaluation");
            const auto id = e.at("slot_id").get<std::string>();
            auto it = std::find_if(s.evaluation->slots.begin(), s.evaluation->slots.end(),
                                   [&](const SelectionSlot& x) { return x.id == id; });
            if (it == s.evaluation->slots.end()) throw Error(ErrorKind::invalid_data, "unknown slot " + id);
            it->alpha1 = e.at("alpha1").get<double>();
            it->position = e.at("position").get<double>();
            it->timestamp = e.at("timestamp").get<std::string>();
            if (s.evaluation->selected_count() == kSlotsPerEvaluation) {
                s.phase = SessionPhase::complete;
                s.evaluation->summaries = summarize_plan(*s.evaluation);
            }
        } else if (type == "confidence_recorded") {
            ConfidenceReport c;
            c.participant_id = r.id;
            c.day = e.at("day").get<int>();
            c.rating = e.at("rating").get<int>();
            c.cues = e.at("cues").get<std::vector<std::string>>();
            c.timestamp = e.at("timestamp").get<std::string>();
            r.confidence.push_back(std::move(c));
        } else {
            throw Error(ErrorKind::invalid_data, "unknown event type '" + type + "'");
        }
        r.next_seq = e.at("seq").get<std::uint64_t>() + 1;
    } catch (const json::exception& ex) {
        throw Error(ErrorKind::invalid_data, std::string("malformed event: ") + ex.what());
    }
}

ParticipantRecord replay(std::string_view participant_id, std::span<const json> events) {
    ParticipantRecord r;
    r.id = participant_id;
    for (const auto& e : events) {
        if (e.value("seq", std::uint64_t{0}) != r.next_seq)
            throw Error(ErrorKind::invalid_data, "event log out of sequence at seq " + std::to_string(r.next_seq));
        apply_event(r, e);
    }
    return r;
}

namespace {

json session_state_json(const ExperimentSession& s, bool include_models) {
    json trials = json::array();
    for (const auto& t : s.trials) trials.push_back(trial_json(t));
    json decisions = json::array();
    for (const auto& d : s.speed_decisions) decisions.push_back(decision_json(d));
    json j = {{"id", s.id},
              {"day", s.day},
              {"session_index", s.session_index},
              {"phase", to_string(s.phase)},
              {"start_speed_steps", s.start_speed_steps},
              {"speed_steps", s.speed_steps},
              {"trials", trials},
              {"speed_decisions", decisions},
              {"evaluation", nullptr}};
    if (s.evaluation) {
        const auto& p = *s.evaluation;
        json slots = json::array();
        for (const auto& slot : p.slots)
            slots.push_back({{"id", slot.id},
                             {"view", to_string(slot.view)},
                             {"repeat_index", slot.repeat_index},
                             {"slider", slider_json(slot.slider)},
                             {"alpha1", slot.alpha1 ? json(*slot.alpha1) : json(nullptr)},
                             {"position", slot.position},
                             {"timestamp", slot.timestamp}});
        json summaries = json::array();
        for (const auto& sm : p.summaries) summaries.push_back(to_json(sm));
        json ev = {{"seed", p.seed},
                   {"slots", slots},
                   {"deviation", deviation_json(p.deviation)},
                   {"gait_params", p.gait_params ? to_json(*p.gait_params) : json(nullptr)},
                   {"summaries", summaries}};
        if (include_models) {
            ev["participant_model"] = to_json(p.participant_model);
            ev["normative_model"] = to_json(p.normative_model);
        }
        j["evaluation"] = std::move(ev);
    }
    return j;
}

json record_state_json(const ParticipantRecord& r, bool include_models) {
    json sessions = json::array();
    for (const auto& s : r.sessions) sessions.push_back(session_state_json(s, include_models));
    json confidence = json::array();
    for (const auto& c : r.confidence)
        confidence.push_back({{"day", c.day}, {"rating", c.rating}, {"cues", c.cues}, {"timestamp", c.timestamp}});
    return {{"participant_id", r.id}, {"next_seq", r.next_seq}, {"sessions", sessions}, {"confidence", confidence}};
}

}  // namespace

json state_json(const ParticipantRecord& record) { return record_state_json(record, true); }

// --- client-bound payloads -----------------------------------------------

json display_json(const ExperimentSession& s) {
    json trials = json::array();
    for (const auto& t : s.trials)
        trials.push_back({{"index", t.index},
                          {"speed_mps", t.speed()},
                          {"handrail_free", t.handrail_free},
                          {"duration_s", t.duration_s}});
    json j = {{"session_id", s.id},
              {"participant_id", s.participant_id},
              {"day", s.day},
              {"session_index", s.session_index},
              {"phase", to_string(s.phase)},
              {"start_speed_mps", speed_mps(s.start_speed_steps)},
              {"speed_mps", speed_mps(s.speed_steps)},
              {"trials", trials}};
    if (s.evaluation) {
        const auto* next = s.evaluation->next_open();
        j["evaluation"] = {{"slot_count", s.evaluation->slots.size()},
                           {"selected_count", s.evaluation->selected_count()},
                           {"next_slot", next ? json(next->id) : json(nullptr)}};
    }
    return j;
}

json display_json(const DisplaySlot& slot) {
    return {{"slot_id", slot.id},
            {"view", to_string(slot.view)},
            {"repeat_index", slot.repeat_index},
            {"status", slot.selected ? "selected" : "open"},
            {"initial_pos", slot.initial_position},
            {"slider_scale", slot.slider_scale}};
}

json display_json(const FramesPayload& f) {
    json frames = json::array();
    for (const auto& fr : f.frames) {
        json pts = json::array();
        for (const auto& p : fr.points) pts.push_back({p[0], p[1]});
        frames.push_back({{"frame_index", fr.frame_index}, {"points", std::move(pts)}});
    }
    return {{"slot_id", f.slot_id}, {"view", to_string(f.view)},     {"pos", f.position},
            {"fps", f.fps},         {"frame_count", f.frames.size()}, {"frames", std::move(frames)}};
}

json display_json(const SpeedDecision& d) {
    return {{"direction", d.direction},
            {"granted", d.granted},
            {"speed_before_mps", speed_mps(d.speed_before)},
            {"speed_mps", speed_mps(d.speed_after)},
            {"block", d.block},
            {"reason", d.reason}};
}

json display_json(const ConfidenceReport& c) {
    return {{"participant_id", c.participant_id}, {"day", c.day}, {"rating", c.rating}, {"cues", c.cues},
            {"scale", "1-10"}};
}

// --- service ---------------------------------------------------------------

struct SessionService::Entry {
    mutable std::shared_mutex mutex;
    ParticipantRecord record;
    std::vector<json> log;

    struct Display {
        GaitBlender blender;
        std::array<ScreenMapping, kAllViews.size()> mappings;
    };
    mutable std::mutex cache_mutex;
    mutable std::map<std::string, std::shared_ptr<const Display>> cache;
};

namespace {

std::size_t view_slot(ViewKind v) {
    return static_cast<std::size_t>(std::find(kAllViews.begin(), kAllViews.end(), v) - kAllViews.begin());
}

std::string utc_now() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::vector<json> read_log(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::io, "cannot read event log " + path.string());
    std::vector<json> events;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        try {
            events.push_back(json::parse(line));
        } catch (const json::exception& e) {
            throw Error(ErrorKind::invalid_data, path.filename().string() + ": " + e.what());
        }
    }
    return events;
}

}  // namespace

SessionService::SessionService(Options options) : options_(std::move(options)) {
    if (!options_.clock) options_.clock = utc_now;
    if (!(options_.display_fps > 0.0)) throw Error(ErrorKind::invalid_argument, "display fps must be positive");
    if (!options_.store_dir) return;
    std::filesystem::create_directories(*options_.store_dir);
    std::vector<std::filesystem::path> logs;
    for (const auto& f : std::filesystem::directory_iterator(*options_.store_dir))
        if (f.path().extension() == ".jsonl") logs.push_back(f.path());
    std::sort(logs.begin(), logs.end());
    for (const auto& path : logs) {
        auto e = std::make_shared<Entry>();
        const auto pid = path.stem().string();
        e->log = read_log(path);
        e->record = replay(pid, e->log);
        entries_.emplace(pid, std::move(e));
    }
}

SessionService::~SessionService() = default;

std::string SessionService::now() const { return options_.clock(); }

std::shared_ptr<SessionService::Entry> SessionService::entry(const std::string& participant_id) const {
    std::shared_lock lock(map_mutex_);
    const auto it = entries_.find(participant_id);
    if (it == entries_.end()) throw Error(ErrorKind::not_found, "unknown participant '" + participant_id + "'");
    return it->second;
}

std::shared_ptr<SessionService::Entry> SessionService::entry_for_session(const std::string& id) const {
    const auto key = parse_session_id(id);
    if (!key) throw Error(ErrorKind::not_found, "unknown session '" + id + "'");
    std::shared_lock lock(map_mutex_);
    const auto it = entries_.find(key->participant_id);
    if (it == entries_.end()) throw Error(ErrorKind::not_found, "unknown session '" + id + "'");
    return it->second;
}

std::shared_ptr<SessionService::Entry> SessionService::entry_or_create(const std::string& participant_id) {
    std::unique_lock lock(map_mutex_);
    auto& slot = entries_[participant_id];
    if (!slot) {
        slot = std::make_shared<Entry>();
        slot->record.id = participant_id;
    }
    return slot;
}

void SessionService::commit(Entry& e, json event) {
    event["seq"] = e.record.next_seq;
    // Apply to a copy first so a failing event leaves neither state nor log touched.
    ParticipantRecord next = e.record;
    apply_event(next, event);
    if (options_.store_dir) {
        const auto dir = *options_.store_dir;
        std::ofstream out(dir / (e.record.id + ".jsonl"), std::ios::app | std::ios::binary);
        if (!out) throw Error(ErrorKind::io, "cannot append to event log for " + e.record.id);
        out << event.dump() << '\n';
        if (!out.flush()) throw Error(ErrorKind::io, "event log write failed for " + e.record.id);
    }
    const bool completes = event.at("type") == "selection_recorded" &&
                           next.find(event.at("session_id").get<std::string>())->phase == SessionPhase::complete;
    e.record = std::move(next);
    e.log.push_back(std::move(event));
    if (options_.store_dir && (completes || e.log.back().at("type") == "confidence_recorded"))
        write_json_file(*options_.store_dir / (e.record.id + ".snapshot.json"), record_state_json(e.record, false));
}

ExperimentSession SessionService::create_session(const std::string& participant_id, int day, int session_index) {
    if (!valid_participant_id(participant_id))
        throw Error(ErrorKind::invalid_argument, "invalid participant id '" + participant_id + "'");
    if (day < 1 || day > kDays) throw Error(ErrorKind::invalid_argument, "day must be 1-4");
    if (session_index < 1 || session_index > kSessionsPerDay)
        throw Error(ErrorKind::invalid_argument, "session index must be 1-3");
    auto e = entry_or_create(participant_id);
    std::unique_lock lock(e->mutex);
    const auto id = session_id(participant_id, day, session_index);
    if (e->record.find(id)) throw Error(ErrorKind::protocol, "duplicate session " + id);
    const ExperimentSession* previous = nullptr;
    for (const auto& s : e->record.sessions) {
        if (s.day == day && s.session_index < session_index && s.phase != SessionPhase::complete)
            throw Error(ErrorKind::protocol, "previous session incomplete (" + s.id + ")");
        if (s.number() < session_number(day, session_index)) previous = &s;
    }
    const int speed = previous ? previous->speed_steps : kDay1StartSpeedSteps;
    commit(*e, {{"type", "session_created"}, {"day", day}, {"session_index", session_index}, {"speed_steps", speed}});
    return *e->record.find(id);
}

ExperimentSession SessionService::record_trial(const std::string& id, const TrialInput& input) {
    auto e = entry_for_session(id);
    std::unique_lock lock(e->mutex);
    const auto* s = e->record.find(id);
    if (!s) throw Error(ErrorKind::not_found, "unknown session '" + id + "'");
    if (s->trials.size() >= kTrialsPerSession) throw Error(ErrorKind::protocol, "session full");
    if (s->phase != SessionPhase::training) throw Error(ErrorKind::protocol, "wrong phase");
    const int expected = static_cast<int>(s->trials.size()) + 1;
    if (input.index && *input.index != expected)
        throw Error(ErrorKind::protocol, "out-of-order trial index " + std::to_string(*input.index) + " (expected " +
                                             std::to_string(expected) + ")");
    if (input.speed_mps && std::abs(*input.speed_mps - speed_mps(s->speed_steps)) > 1e-9)
        throw Error(ErrorKind::protocol, "speed mismatch: scheduled " + format_number(speed_mps(s->speed_steps), 2) +
                                             " m/s");
    if (!(input.duration_s > 0.0)) throw Error(ErrorKind::invalid_argument, "trial duration must be positive");
    const Trial t{expected, s->speed_steps, input.handrail_free, input.duration_s};
    commit(*e, {{"type", "trial_recorded"}, {"session_id", id}, {"trial", trial_json(t)}});
    return *e->record.find(id);
}

SpeedDecision SessionService::request_speed_change(const std::string& id, int direction) {
    auto e = entry_for_session(id);
    std::unique_lock lock(e->mutex);
    const auto* s = e->record.find(id);
    if (!s) throw Error(ErrorKind::not_found, "unknown session '" + id + "'");
    if (s->day < 2) throw Error(ErrorKind::protocol, "speed change requests start on day 2");
    const std::size_t n = s->trials.size();
    if (n == 0 || n % kTrialsPerBlock != 0) throw Error(ErrorKind::protocol, "no complete block of three trials");
    const std::size_t block = n / kTrialsPerBlock;
    for (const auto& d : s->speed_decisions)
        if (d.block == block) throw Error(ErrorKind::protocol, "speed change already decided for this block");
    auto decision =
        decide_speed_change(s->day, direction, std::span(s->trials).subspan(n - kTrialsPerBlock), s->speed_steps);
    decision.block = block;
    commit(*e, {{"type", "speed_decision"}, {"session_id", id}, {"decision", decision_json(decision)}});
    return decision;
}

ExperimentSession SessionService::begin_evaluation(const std::string& id, EvaluationInput input) {
    auto e = entry_for_session(id);
    std::unique_lock lock(e->mutex);
    const auto* s = e->record.find(id);
    if (!s) throw Error(ErrorKind::not_found, "unknown session '" + id + "'");
    if (s->phase != SessionPhase::evaluation) throw Error(ErrorKind::protocol, "wrong phase");
    if (s->evaluation) throw Error(ErrorKind::protocol, "evaluation already started");
    if (!input.normative_model) input.normative_model = options_.normative_model;
    if (!input.normative_model || input.participant_model.n_components == 0)
        throw Error(ErrorKind::invalid_argument, "models missing");

    const auto deviation = gait_deviation(input.participant_model, *input.normative_model, options_.deviation_mode);
    std::uint64_t h = 1469598103934665603ULL;  // FNV-1a of the session id
    for (unsigned char c : id) h = (h ^ c) * 1099511628211ULL;
    const std::uint64_t seed = input.seed ? *input.seed : derive_seed(options_.seed, h);

    json slots = json::array();
    std::uint64_t k = 0;
    for (ViewKind v : kAllViews)
        for (int r = 1; r <= static_cast<int>(kRepeatsPerView); ++r)
            slots.push_back({{"id", slot_id(id, v, r)},
                             {"view", to_string(v)},
                             {"repeat_index", r},
                             {"slider", slider_json(make_slider_config(derive_seed(seed, k++)))}});
    commit(*e, {{"type", "evaluation_started"},
                {"session_id", id},
                {"seed", seed},
                {"slots", slots},
                {"participant_model", to_json(input.participant_model)},
                {"normative_model", to_json(*input.normative_model)},
                {"deviation", deviation_json(deviation)},
                {"gait_params", input.gait_params ? to_json(*input.gait_params) : json(nullptr)}});
    return *e->record.find(id);
}

ExperimentSession SessionService::record_selection(const std::string& slot, double alpha1) {
    auto e = entry(participant_of_slot(slot));
    std::unique_lock lock(e->mutex);
    const auto sid = slot.substr(0, slot.find('.'));
    const auto* s = e->record.find(sid);
    if (!s || !s->evaluation) throw Error(ErrorKind::not_found, "unknown slot '" + slot + "'");
    const auto& slots = s->evaluation->slots;
    const auto it = std::find_if(slots.begin(), slots.end(), [&](const SelectionSlot& x) { return x.id == slot; });
    if (it == slots.end()) throw Error(ErrorKind::not_found, "unknown slot '" + slot + "'");
    if (it->alpha1) throw Error(ErrorKind::protocol, "duplicate slot " + slot);
    if (s->evaluation->next_open() != &*it)
        throw Error(ErrorKind::protocol, "slot out of order (next is " + s->evaluation->next_open()->id + ")");
    if (!std::isfinite(alpha1) || alpha1 < it->slider.min_alpha || alpha1 > it->slider.max_alpha)
        throw Error(ErrorKind::invalid_argument, "out of slider range");
    commit(*e, {{"type", "selection_recorded"},
                {"session_id", sid},
                {"slot_id", slot},
                {"alpha1", alpha1},
                {"position", it->slider.position_of(alpha1)},
                {"timestamp", now()}});
    return *e->record.find(sid);
}

ExperimentSession SessionService::record_selection_at(const std::string& slot, double position) {
    if (!(position >= 0.0 && position <= 1.0))
        throw Error(ErrorKind::invalid_argument, "slider position outside [0, 1]");
    double alpha1 = 0.0;
    {
        auto e = entry(participant_of_slot(slot));
        std::shared_lock lock(e->mutex);
        const auto* s = e->record.find(slot.substr(0, slot.find('.')));
        if (!s || !s->evaluation) throw Error(ErrorKind::not_found, "unknown slot '" + slot + "'");
        const auto& slots = s->evaluation->slots;
        const auto it = std::find_if(slots.begin(), slots.end(), [&](const SelectionSlot& x) { return x.id == slot; });
        if (it == slots.end()) throw Error(ErrorKind::not_found, "unknown slot '" + slot + "'");
        // Clamp guards the pos = 1 endpoint against rounding past max_alpha.
        alpha1 = std::clamp(it->slider.alpha_at(position), it->slider.min_alpha, it->slider.max_alpha);
    }
    return record_selection(slot, alpha1);
}

ConfidenceReport SessionService::record_confidence(const std::string& participant_id, int day, int rating,
                                                   std::vector<std::string> cues) {
    auto e = entry(participant_id);
    std::unique_lock lock(e->mutex);
    if (day < 1 || day > kDays) throw Error(ErrorKind::invalid_argument, "day must be 1-4");
    if (rating < kConfidenceMin || rating > kConfidenceMax)
        throw Error(ErrorKind::invalid_argument, "rating outside 1-10");
    for (const auto& c : e->record.confidence)
        if (c.day == day) throw Error(ErrorKind::protocol, "confidence already recorded for day " + std::to_string(day));
    commit(*e, {{"type", "confidence_recorded"}, {"day", day}, {"rating", rating}, {"cues", cues}, {"timestamp", now()}});
    return e->record.confidence.back();
}

std::vector<DisplaySlot> SessionService::display_slots(const std::string& id) const {
    auto e = entry_for_session(id);
    std::shared_lock lock(e->mutex);
    const auto* s = e->record.find(id);
    if (!s) throw Error(ErrorKind::not_found, "unknown session '" + id + "'");
    if (!s->evaluation) throw Error(ErrorKind::protocol, "evaluation not started");
    std::vector<DisplaySlot> out;
    for (const auto& slot : s->evaluation->slots)
        out.push_back({slot.id, slot.view, slot.repeat_index, slot.alpha1.has_value(),
                       slot.slider.position_of(slot.slider.initial_alpha),
                       (slot.slider.max_alpha - slot.slider.min_alpha) /
                           (CoefficientOfMotion::kMax - CoefficientOfMotion::kMin)});
    return out;
}

FramesPayload SessionService::frames_for_slot(const std::string& slot, double position,
                                              std::optional<ViewKind> view) const {
    if (!(position >= 0.0 && position <= 1.0))
        throw Error(ErrorKind::invalid_argument, "slider position outside [0, 1]");
    auto e = entry(participant_of_slot(slot));
    const auto sid = slot.substr(0, slot.find('.'));
    std::shared_ptr<const Entry::Display> display;
    SliderConfig slider;
    ViewKind slot_view = ViewKind::frontal;
    double rate_hz = 100.0;
    {
        std::shared_lock lock(e->mutex);
        const auto* s = e->record.find(sid);
        if (!s || !s->evaluation) throw Error(ErrorKind::not_found, "unknown slot '" + slot + "'");
        const auto& slots = s->evaluation->slots;
        const auto it = std::find_if(slots.begin(), slots.end(), [&](const SelectionSlot& x) { return x.id == slot; });
        if (it == slots.end()) throw Error(ErrorKind::not_found, "unknown slot '" + slot + "'");
        slider = it->slider;
        slot_view = it->view;
        rate_hz = s->evaluation->participant_model.rate_hz;

        std::lock_guard cache_lock(e->cache_mutex);
        auto& cached = e->cache[sid];
        if (!cached) {
            const auto& pm = s->evaluation->participant_model;
            auto nm = s->evaluation->normative_model;
            if (pm.mean_cycle_samples > 0.0 && nm.samples_per_cycle > 0.0) nm = align_cadence(nm, pm.mean_cycle_samples);
            GaitBlender blender(pm, nm);
            const auto own = blender(CoefficientOfMotion(0.0));
            std::array<ScreenMapping, kAllViews.size()> mappings;
            for (ViewKind v : kAllViews) mappings[view_slot(v)] = fit_screen_mapping(own.samples, ViewingAngle{v});
            cached = std::make_shared<const Entry::Display>(Entry::Display{std::move(blender), mappings});
        }
        display = cached;
    }

    const ViewKind v = view.value_or(slot_view);
    const double alpha1 = std::clamp(slider.alpha_at(position), slider.min_alpha, slider.max_alpha);
    const auto gait = display->blender(CoefficientOfMotion(alpha1));
    auto frames = project(gait, ViewingAngle{v}, display->mappings[view_slot(v)]);
    const auto loop = static_cast<std::size_t>(
        std::max<long long>(1, std::llround(static_cast<double>(frames.size()) * options_.display_fps / rate_hz)));
    auto stream = animate(std::move(frames), rate_hz, options_.display_fps);
    FramesPayload out{slot, v, position, options_.display_fps, {}};
    out.frames.reserve(loop);
    for (std::size_t k = 0; k < loop; ++k) out.frames.push_back(*stream.next().frame);
    return out;
}

ExperimentSession SessionService::session(const std::string& id) const {
    auto e = entry_for_session(id);
    std::shared_lock lock(e->mutex);
    const auto* s = e->record.find(id);
    if (!s) throw Error(ErrorKind::not_found, "unknown session '" + id + "'");
    return *s;
}

ParticipantRecord SessionService::participant(const std::string& participant_id) const {
    auto e = entry(participant_id);
    std::shared_lock lock(e->mutex);
    return e->record;
}

std::vector<std::string> SessionService::participant_ids() const {
    std::shared_lock lock(map_mutex_);
    std::vector<std::string> ids;
    for (const auto& [id, entry] : entries_) ids.push_back(id);
    return ids;
}

std::vector<json> SessionService::event_log(const std::string& participant_id) const {
    auto e = entry(participant_id);
    std::shared_lock lock(e->mutex);
    return e->log;
}

}  // namespace scomo
