#include <algorithm>
#include <functional>
#include <map>
#include <optional>

#include "scomo/error.hpp"
#include "scomo/serialization.hpp"
#include "scomo/session.hpp"

namespace scomo {

using nlohmann::json;

namespace {

// Sessions a participant needs before trends and correlations are reported.
constexpr std::size_t kMinTrendSessions = 3;

std::vector<const ExperimentSession*> completed(const ParticipantRecord& r) {
    std::vector<const ExperimentSession*> out;
    for (const auto& s : r.sessions)
        if (s.phase == SessionPhase::complete && s.evaluation) out.push_back(&s);
    return out;
}

const SelectionSummary& summary_for(const ExperimentSession& s, ViewKind v) {
    for (const auto& sm : s.evaluation->summaries)
        if (sm.view.kind == v) return sm;
    throw Error(ErrorKind::invalid_data, "missing selection summary for " + s.id);
}

json metadata(DeviationMode mode) {
    return {{"confidence_scale", "1-10 (ordinal)"},
            {"symmetry_index_formula", kSymmetryIndexFormula},
            {"step_time", "contralateral heel strike to ipsilateral heel strike (step time, not stance time)"},
            {"deviation_mode", to_string(mode)},
            {"scomo_sd", "sample standard deviation (n-1)"},
            {"session_covariate", "session number 1-12 = 3*(day-1) + session_index"},
            {"mixed_model_method", kMixedModelMethod},
            {"p_value_method", kPValueMethod}};
}

json session_entry(const ExperimentSession& s) {
    json trials = json::array();
    for (const auto& t : s.trials)
        trials.push_back({{"index", t.index}, {"speed_mps", t.speed()}, {"handrail_free", t.handrail_free}});
    json decisions = json::array();
    for (const auto& d : s.speed_decisions) decisions.push_back(display_json(d));
    json scomo = json::object();
    for (ViewKind v : kAllViews) {
        const auto& sm = summary_for(s, v);
        scomo[std::string(to_string(v))] = {{"mean", sm.mean_scomo}, {"sd", sm.sd_scomo}, {"n_repeats", sm.n_repeats}};
    }
    const auto& ev = *s.evaluation;
    return {{"session_id", s.id},
            {"day", s.day},
            {"session_index", s.session_index},
            {"session_number", s.number()},
            {"start_speed_mps", speed_mps(s.start_speed_steps)},
            {"end_speed_mps", speed_mps(s.speed_steps)},
            {"trials", trials},
            {"speed_decisions", decisions},
            {"n_components", ev.participant_model.n_components},
            {"deviation", to_json(ev.deviation)},
            {"gait_params", ev.gait_params ? to_json(*ev.gait_params) : json(nullptr)},
            {"scomo", scomo}};
}

struct Response {
    std::string name;
    std::function<std::optional<double>(const ExperimentSession&)> value;
};

std::vector<Response> responses() {
    std::vector<Response> out;
    for (ViewKind v : kAllViews)
        out.push_back({"scomo_" + std::string(to_string(v)),
                       [v](const ExperimentSession& s) -> std::optional<double> { return summary_for(s, v).mean_scomo; }});
    out.push_back({"gait_deviation", [](const ExperimentSession& s) -> std::optional<double> {
                       return s.evaluation->deviation.value;
                   }});
    for (std::size_t k = 0; k < kGaitParameterCount; ++k)
        out.push_back({std::string(kGaitParameterNames[k]), [k](const ExperimentSession& s) -> std::optional<double> {
                           if (!s.evaluation->gait_params) return std::nullopt;
                           return as_array(*s.evaluation->gait_params)[k];
                       }});
    return out;
}

json mixed_models(const std::vector<ParticipantRecord>& cohort) {
    std::vector<std::pair<std::string, std::vector<const ExperimentSession*>>> groups;
    for (const auto& r : cohort) {
        auto done = completed(r);
        if (done.size() >= kMinTrendSessions) groups.emplace_back(r.id, std::move(done));
    }
    if (groups.size() < 2)
        return {{"status", "insufficient participants"},
                {"detail", "needs at least 2 participants with 3 or more completed sessions"}};
    json fits = json::object();
    for (const auto& resp : responses()) {
        std::vector<double> y, session;
        std::vector<std::string> group;
        for (const auto& [pid, sessions] : groups)
            for (const auto* s : sessions)
                if (const auto v = resp.value(*s)) {
                    y.push_back(*v);
                    session.push_back(s->number());
                    group.push_back(pid);
                }
        try {
            auto j = to_json(fit_random_intercept(y, session, group));
            j["status"] = "ok";
            fits[resp.name] = std::move(j);
        } catch (const Error& e) {
            fits[resp.name] = {{"status", "not estimable"}, {"detail", e.what()}};
        }
    }
    json participants = json::array();
    for (const auto& g : groups) participants.push_back(g.first);
    return {{"status", "ok"}, {"participants", participants}, {"fits", fits}};
}

json correlations(const std::vector<const ExperimentSession*>& sessions) {
    std::vector<GaitParameterSet> params;
    std::vector<const ExperimentSession*> used;
    for (const auto* s : sessions)
        if (s->evaluation->gait_params) {
            params.push_back(*s->evaluation->gait_params);
            used.push_back(s);
        }
    if (used.size() < kMinTrendSessions) return {{"status", "insufficient sessions"}};
    json out = {{"status", "ok"}};
    for (ViewKind v : kAllViews) {
        std::vector<double> scomo;
        for (const auto* s : used) scomo.push_back(summary_for(*s, v).mean_scomo);
        out[std::string(to_string(v))] = to_json(correlate_with_scomo(params, scomo, ViewingAngle{v}));
    }
    return out;
}

json scomo_table(const ParticipantRecord& r) {
    json table = json::object();
    for (ViewKind v : kAllViews) {
        json rows = json::array();
        for (const auto* s : completed(r)) {
            const auto& sm = summary_for(*s, v);
            rows.push_back({{"participant_id", r.id},
                            {"session_id", s->id},
                            {"session_number", s->number()},
                            {"mean", sm.mean_scomo},
                            {"sd", sm.sd_scomo},
                            {"n_repeats", sm.n_repeats}});
        }
        table[std::string(to_string(v))] = std::move(rows);
    }
    return table;
}

json participant_report(const ParticipantRecord& r, const std::vector<ParticipantRecord>& cohort, DeviationMode mode) {
    const auto done = completed(r);
    if (done.empty()) throw Error(ErrorKind::not_found, "no data for participant '" + r.id + "'");
    json sessions = json::array();
    for (const auto* s : done) sessions.push_back(session_entry(*s));
    json confidence = json::array();
    for (const auto& c : r.confidence) confidence.push_back({{"day", c.day}, {"rating", c.rating}, {"cues", c.cues}});
    return {{"format_version", kModelFormatVersion},
            {"kind", "participant_report"},
            {"participant_id", r.id},
            {"metadata", metadata(mode)},
            {"completed_sessions", done.size()},
            {"sessions", sessions},
            {"scomo_table", scomo_table(r)},
            {"confidence", confidence},
            {"correlations", correlations(done)},
            {"mixed_models", done.size() < kMinTrendSessions ? json{{"status", "insufficient sessions"}}
                                                              : mixed_models(cohort)}};
}

}  // namespace

json SessionService::export_report(const std::string& participant_id) const {
    const auto target = participant(participant_id);
    std::vector<ParticipantRecord> cohort;
    for (const auto& id : participant_ids()) cohort.push_back(participant(id));
    return participant_report(target, cohort, options_.deviation_mode);
}

json SessionService::export_cohort_report() const {
    std::vector<ParticipantRecord> cohort;
    for (const auto& id : participant_ids()) cohort.push_back(participant(id));
    json participants = json::array();
    json table = json::object();
    for (ViewKind v : kAllViews) table[std::string(to_string(v))] = json::array();
    for (const auto& r : cohort) {
        if (completed(r).empty()) continue;
        participants.push_back({{"participant_id", r.id}, {"completed_sessions", completed(r).size()}});
        const auto t = scomo_table(r);
        for (ViewKind v : kAllViews) {
            auto& dst = table[std::string(to_string(v))];
            for (const auto& row : t.at(std::string(to_string(v)))) dst.push_back(row);
        }
    }
    if (participants.empty()) throw Error(ErrorKind::not_found, "no data");
    return {{"format_version", kModelFormatVersion},
            {"kind", "cohort_report"},
            {"metadata", metadata(options_.deviation_mode)},
            {"participants", participants},
            {"scomo_table", table},
            {"mixed_models", mixed_models(cohort)}};
}

}  // namespace scomo
