#include "scomo/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "scomo/error.hpp"
#include "scomo/gait_params.hpp"
#include "scomo/serialization.hpp"
#include "scomo/session.hpp"
#include "scomo/stats.hpp"
#include "scomo/synthesis.hpp"

namespace scomo {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_csv(std::string_view line) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (true) {
        const auto j = line.find(',', i);
        out.push_back(trim(line.substr(i, j == std::string_view::npos ? std::string_view::npos : j - i)));
        if (j == std::string_view::npos) break;
        i = j + 1;
    }
    return out;
}

double to_double(const std::string& text, std::string_view what) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(text, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (text.empty() || used != text.size() || !std::isfinite(v))
        throw Error(ErrorKind::invalid_data, std::string(what) + ": '" + text + "' is not a number");
    return v;
}

int to_int(const std::string& text, std::string_view what) {
    const double v = to_double(text, what);
    if (v != std::floor(v)) throw Error(ErrorKind::invalid_data, std::string(what) + ": '" + text + "' is not an integer");
    return static_cast<int>(v);
}

bool to_bool(const std::string& text, std::string_view what) {
    if (text == "true" || text == "1" || text == "yes") return true;
    if (text == "false" || text == "0" || text == "no") return false;
    throw Error(ErrorKind::invalid_data, std::string(what) + ": '" + text + "' is not a boolean");
}

// CSV with a header row; cells addressed by column name.
class CsvTable {
public:
    explicit CsvTable(const fs::path& path) : path_(path) {
        std::ifstream in(path);
        if (!in) throw Error(ErrorKind::not_found, "cannot open " + path.string());
        std::string line;
        if (!std::getline(in, line)) throw Error(ErrorKind::invalid_data, path.filename().string() + ": empty file");
        const auto header = split_csv(line);
        for (std::size_t i = 0; i < header.size(); ++i) columns_[header[i]] = i;
        std::size_t n = 1;
        while (std::getline(in, line)) {
            ++n;
            if (trim(line).empty() || line[0] == '#') continue;
            auto cells = split_csv(line);
            if (cells.size() != header.size())
                throw Error(ErrorKind::invalid_data, path.filename().string() + ": line " + std::to_string(n) +
                                                         " has " + std::to_string(cells.size()) + " cells, expected " +
                                                         std::to_string(header.size()));
            rows_.push_back(std::move(cells));
            lines_.push_back(n);
        }
    }

    void require(std::initializer_list<std::string_view> names) const {
        for (auto n : names)
            if (!columns_.count(std::string(n)))
                throw Error(ErrorKind::invalid_data, path_.filename().string() + ": missing column '" + std::string(n) + "'");
    }
    bool has(std::string_view name) const { return columns_.count(std::string(name)) != 0; }
    std::size_t size() const { return rows_.size(); }
    const std::string& at(std::size_t row, std::string_view name) const {
        return rows_[row][columns_.at(std::string(name))];
    }
    std::string where(std::size_t row, std::string_view name) const {
        return path_.filename().string() + ":" + std::to_string(lines_[row]) + " " + std::string(name);
    }

private:
    fs::path path_;
    std::map<std::string, std::size_t> columns_;
    std::vector<std::vector<std::string>> rows_;
    std::vector<std::size_t> lines_;
};

fs::path resolve(const fs::path& base, const std::string& value) {
    if (value.empty()) return {};
    const fs::path p(value);
    return p.is_absolute() ? p : base / p;
}

}  // namespace

// --- config -------------------------------------------------------------------

PipelineConfig parse_config(std::istream& in, const fs::path& base_dir) {
    std::map<std::string, std::string> kv;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        if (trim(line).empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw Error(ErrorKind::invalid_argument, "config line " + std::to_string(n) + ": expected key = value");
        auto key = trim(line.substr(0, eq));
        auto value = trim(line.substr(eq + 1));
        if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
        if (!kv.emplace(key, value).second)
            throw Error(ErrorKind::invalid_argument, "config line " + std::to_string(n) + ": duplicate key '" + key + "'");
    }

    auto take = [&](const char* key) -> std::optional<std::string> {
        const auto it = kv.find(key);
        if (it == kv.end()) return std::nullopt;
        auto v = it->second;
        kv.erase(it);
        return v;
    };
    auto need = [&](const char* key) {
        auto v = take(key);
        if (!v || v->empty()) throw Error(ErrorKind::invalid_argument, std::string("config: missing '") + key + "'");
        return *v;
    };
    auto number = [&](const char* key, double& dst, double lo, double hi) {
        if (auto v = take(key)) {
            dst = to_double(*v, key);
            if (!(dst >= lo && dst <= hi))
                throw Error(ErrorKind::invalid_argument, std::string("config: ") + key + " outside [" +
                                                             format_number(lo, 3) + ", " + format_number(hi, 3) + "]");
        }
    };

    const auto version = need("config_version");
    if (to_int(version, "config_version") != kConfigVersion)
        throw Error(ErrorKind::invalid_argument, "config: unsupported config_version " + version);

    PipelineConfig c;
    c.trials = resolve(base_dir, need("trials"));
    c.normative_dir = resolve(base_dir, need("normative_dir"));
    c.selections = resolve(base_dir, need("selections"));
    if (auto v = take("confidence"); v && !v->empty()) c.confidence = resolve(base_dir, *v);
    c.output_dir = resolve(base_dir, need("output_dir"));
    number("filter_cutoff_hz", c.filter_cutoff_hz, 0.1, 1e6);
    number("event_threshold_n", c.event_threshold_n, 1e-6, 1e6);
    number("debounce_ms", c.debounce_ms, 0.0, 1000.0);
    double cycles = static_cast<double>(c.n_cycles);
    number("n_cycles", cycles, 2.0, 1000.0);
    if (cycles != std::floor(cycles)) throw Error(ErrorKind::invalid_argument, "config: n_cycles must be an integer");
    c.n_cycles = static_cast<std::size_t>(cycles);
    if (auto v = take("cycle_side")) c.cycle_side = parse_side(*v);
    number("edge_guard_s", c.edge_guard_s, 0.0, 60.0);
    number("variance_threshold", c.variance_threshold, 1e-6, 1.0);
    if (auto v = take("deviation_mode")) c.deviation_mode = parse_deviation_mode(*v);
    if (auto v = take("normative_pooling")) {
        if (*v == "time_normalized") c.pooling = NormativePooling::time_normalized;
        else if (*v == "raw_concat") c.pooling = NormativePooling::raw_concat;
        else throw Error(ErrorKind::invalid_argument, "config: normative_pooling must be time_normalized or raw_concat");
    }
    if (auto v = take("phase_mode")) {
        if (*v == "free") c.phase_mode = PhaseMode::free;
        else if (*v == "none") c.phase_mode = PhaseMode::none;
        else throw Error(ErrorKind::invalid_argument, "config: phase_mode must be free or none");
    }
    if (auto v = take("belt_corrected_step_length")) c.belt_corrected_step_length = to_bool(*v, "belt_corrected_step_length");
    number("synth_alpha", c.synth_alpha, CoefficientOfMotion::kMin, CoefficientOfMotion::kMax);
    number("display_fps", c.display_fps, 1.0, 1000.0);
    if (auto v = take("seed")) {
        try {
            std::size_t used = 0;
            c.seed = std::stoull(*v, &used);
            if (used != v->size() || v->find('-') != std::string::npos) throw std::invalid_argument("seed");
        } catch (const std::exception&) {
            throw Error(ErrorKind::invalid_argument, "config: seed must be a non-negative integer");
        }
    }
    if (!kv.empty()) throw Error(ErrorKind::invalid_argument, "config: unknown key '" + kv.begin()->first + "'");
    return c;
}

PipelineConfig load_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::not_found, "cannot open config " + path.string());
    return parse_config(in, path.parent_path());
}

std::string format_config(const PipelineConfig& c) {
    std::ostringstream out;
    out << "config_version = " << kConfigVersion << '\n'
        << "trials = " << c.trials.generic_string() << '\n'
        << "normative_dir = " << c.normative_dir.generic_string() << '\n'
        << "selections = " << c.selections.generic_string() << '\n';
    if (c.confidence) out << "confidence = " << c.confidence->generic_string() << '\n';
    out << "output_dir = " << c.output_dir.generic_string() << '\n'
        << "filter_cutoff_hz = " << c.filter_cutoff_hz << '\n'
        << "event_threshold_n = " << c.event_threshold_n << '\n'
        << "debounce_ms = " << c.debounce_ms << '\n'
        << "n_cycles = " << c.n_cycles << '\n'
        << "cycle_side = " << to_string(c.cycle_side) << '\n'
        << "edge_guard_s = " << c.edge_guard_s << '\n'
        << "variance_threshold = " << c.variance_threshold << '\n'
        << "deviation_mode = " << to_string(c.deviation_mode) << '\n'
        << "normative_pooling = " << to_string(c.pooling) << '\n'
        << "phase_mode = " << to_string(c.phase_mode) << '\n'
        << "belt_corrected_step_length = " << (c.belt_corrected_step_length ? "true" : "false") << '\n'
        << "synth_alpha = " << c.synth_alpha << '\n'
        << "display_fps = " << c.display_fps << '\n'
        << "seed = " << c.seed << '\n';
    return out.str();
}

std::string_view to_string(Stage stage) {
    switch (stage) {
        case Stage::ingest: return "ingest";
        case Stage::fit: return "fit";
        case Stage::synth: return "synth";
        case Stage::deviation: return "deviation";
        case Stage::params: return "params";
        case Stage::correlate: return "correlate";
        case Stage::report: return "report";
    }
    return "ingest";
}

Stage parse_stage(std::string_view text) {
    for (Stage s : kAllStages)
        if (to_string(s) == text) return s;
    throw Error(ErrorKind::invalid_argument, "unknown stage '" + std::string(text) + "'");
}

// --- manifest -------------------------------------------------------------------

std::vector<TrialRow> read_trial_manifest(const fs::path& path) {
    const CsvTable t(path);
    t.require({"participant_id", "day", "session", "trial", "speed_mps", "handrail_free"});
    const auto base = path.parent_path();
    std::vector<TrialRow> rows;
    for (std::size_t i = 0; i < t.size(); ++i) {
        TrialRow r;
        r.participant_id = t.at(i, "participant_id");
        r.day = to_int(t.at(i, "day"), t.where(i, "day"));
        r.session_index = to_int(t.at(i, "session"), t.where(i, "session"));
        r.trial = to_int(t.at(i, "trial"), t.where(i, "trial"));
        r.speed_mps = to_double(t.at(i, "speed_mps"), t.where(i, "speed_mps"));
        r.handrail_free = to_bool(t.at(i, "handrail_free"), t.where(i, "handrail_free"));
        if (t.has("speed_request") && !t.at(i, "speed_request").empty())
            r.speed_request = to_int(t.at(i, "speed_request"), t.where(i, "speed_request"));
        if (t.has("robotic_side") && !t.at(i, "robotic_side").empty()) {
            const auto& side = t.at(i, "robotic_side");
            if (side == "left") r.robotic_side = BodySide::left;
            else if (side == "right") r.robotic_side = BodySide::right;
            else throw Error(ErrorKind::invalid_data, t.where(i, "robotic_side") + ": expected left or right");
        }
        if (t.has("trajectory")) r.trajectory = resolve(base, t.at(i, "trajectory"));
        if (t.has("grf_robotic")) r.grf_robotic = resolve(base, t.at(i, "grf_robotic"));
        if (t.has("grf_contralateral")) r.grf_contralateral = resolve(base, t.at(i, "grf_contralateral"));
        rows.push_back(std::move(r));
    }
    return rows;
}

std::vector<SessionCapture> session_captures(const std::vector<TrialRow>& rows) {
    std::map<std::tuple<std::string, int, int>, const TrialRow*> last;
    for (const auto& r : rows) {
        if (r.trajectory.empty()) continue;
        auto& slot = last[{r.participant_id, r.day, r.session_index}];
        if (!slot || r.trial > slot->trial) slot = &r;
    }
    std::vector<SessionCapture> out;
    for (const auto& [key, r] : last)
        out.push_back({r->participant_id, session_id(r->participant_id, r->day, r->session_index), r->day,
                       r->session_index, r->robotic_side, r->speed_mps, r->trajectory, r->grf_robotic,
                       r->grf_contralateral});
    std::sort(out.begin(), out.end(), [](const SessionCapture& a, const SessionCapture& b) {
        return std::tuple(a.participant_id, session_number(a.day, a.session_index)) <
               std::tuple(b.participant_id, session_number(b.day, b.session_index));
    });
    return out;
}

namespace {

ForcePlateRecord load_plate(const fs::path& path, Side expected, const std::string& sid) {
    if (path.empty())
        throw Error(ErrorKind::not_found, "missing " + std::string(to_string(expected)) + " GRF path for " + sid);
    auto grf = load_grf(path);
    if (grf.side != expected)
        throw Error(ErrorKind::invalid_data, path.filename().string() + ": header side is " +
                                                 std::string(to_string(grf.side)) + ", expected " +
                                                 std::string(to_string(expected)));
    return grf;
}

GaitEvents guard_events(const GaitEvents& events, std::size_t length, std::size_t guard) {
    GaitEvents out;
    out.warnings = events.warnings;
    auto keep = [&](const std::vector<std::size_t>& v) {
        std::vector<std::size_t> k;
        for (std::size_t i : v)
            if (i >= guard && i + guard < length) k.push_back(i);
        return k;
    };
    for (Side s : {Side::robotic, Side::contralateral}) {
        out.side(s).heel_strikes = keep(events.side(s).heel_strikes);
        out.side(s).toe_offs = keep(events.side(s).toe_offs);
    }
    return out;
}

GaitEvents events_from_json(const json& j) {
    GaitEvents e;
    for (Side s : {Side::robotic, Side::contralateral}) {
        const auto& side = j.at(std::string(to_string(s)));
        e.side(s).heel_strikes = side.at("heel_strikes").get<std::vector<std::size_t>>();
        e.side(s).toe_offs = side.at("toe_offs").get<std::vector<std::size_t>>();
    }
    e.warnings = j.at("warnings").get<std::vector<std::string>>();
    return e;
}

}  // namespace

IngestedTrial ingest_capture(const SessionCapture& cap, const PipelineConfig& cfg) {
    if (cap.trajectory.empty()) throw Error(ErrorKind::not_found, "missing trajectory path for " + cap.session_id);
    const auto raw = load_trajectory(cap.trajectory);
    const auto grf_r = load_plate(cap.grf_robotic, Side::robotic, cap.session_id);
    const auto grf_c = load_plate(cap.grf_contralateral, Side::contralateral, cap.session_id);
    IngestedTrial out;
    out.trajectory = lowpass_filter(raw, cfg.filter_cutoff_hz);
    EventDetectionOptions opts;
    opts.threshold_n = cfg.event_threshold_n;
    opts.debounce_ms = cfg.debounce_ms;
    opts.kinematics_rate_hz = raw.rate_hz;
    const auto events = merge_events(detect_gait_events(remove_zero_offset(grf_r), opts),
                                     detect_gait_events(remove_zero_offset(grf_c), opts));
    const auto guard = static_cast<std::size_t>(std::llround(cfg.edge_guard_s * raw.rate_hz));
    out.events = guard_events(events, out.trajectory.length(), guard);
    return out;
}

// --- stages -----------------------------------------------------------------------

namespace {

struct Context {
    const PipelineConfig& cfg;
    std::ostream* log;

    fs::path out(const fs::path& rel) const { return cfg.output_dir / rel; }
    void note(Stage s, const std::string& msg) const {
        if (log) *log << '[' << to_string(s) << "] " << msg << '\n';
    }
};

std::vector<SessionCapture> captures(const Context& ctx) {
    auto caps = session_captures(read_trial_manifest(ctx.cfg.trials));
    if (caps.empty()) throw Error(ErrorKind::invalid_data, "trial manifest lists no captured trials");
    return caps;
}

fs::path events_file(const std::string& sid) { return fs::path("ingest") / (sid + ".events.json"); }
fs::path model_file(const std::string& sid) { return fs::path("models") / (sid + ".json"); }

IngestedTrial load_ingested(const Context& ctx, const SessionCapture& cap) {
    const auto path = ctx.out(events_file(cap.session_id));
    if (!fs::exists(path)) throw Error(ErrorKind::not_found, "no ingest output for " + cap.session_id + " (run ingest)");
    IngestedTrial t;
    t.trajectory = lowpass_filter(load_trajectory(cap.trajectory), ctx.cfg.filter_cutoff_hz);
    t.events = events_from_json(read_json_file(path).at("events"));
    return t;
}

ParticipantModel load_model(const Context& ctx, const std::string& sid) {
    const auto path = ctx.out(model_file(sid));
    if (!fs::exists(path)) throw Error(ErrorKind::not_found, "no model for " + sid + " (run fit)");
    return participant_model_from_json(read_json_file(path));
}

NormativeModel load_normative(const Context& ctx) {
    const auto path = ctx.out("normative_model.json");
    if (!fs::exists(path)) throw Error(ErrorKind::not_found, "no normative model (run fit)");
    return normative_model_from_json(read_json_file(path));
}

void write_text(const fs::path& path, const std::string& text) { write_file_atomic(path, text); }

void stage_ingest(const Context& ctx) {
    std::ostringstream csv;
    csv << "session_id,participant_id,frames,rate_hz,robotic_heel_strikes,contralateral_heel_strikes,warnings\n";
    const auto caps = captures(ctx);
    for (const auto& cap : caps) {
        const auto t = ingest_capture(cap, ctx.cfg);
        write_json_file(ctx.out(events_file(cap.session_id)),
                        {{"session_id", cap.session_id},
                         {"frames", t.trajectory.length()},
                         {"rate_hz", t.trajectory.rate_hz},
                         {"edge_guard_s", ctx.cfg.edge_guard_s},
                         {"events", to_json(t.events)}});
        csv << cap.session_id << ',' << cap.participant_id << ',' << t.trajectory.length() << ','
            << format_number(t.trajectory.rate_hz, 3) << ',' << t.events.robotic.heel_strikes.size() << ','
            << t.events.contralateral.heel_strikes.size() << ',' << t.events.warnings.size() << '\n';
    }
    write_text(ctx.out("ingest.csv"), csv.str());
    ctx.note(Stage::ingest, std::to_string(caps.size()) + " sessions");
}

void stage_fit(const Context& ctx) {
    std::vector<fs::path> files;
    if (!fs::is_directory(ctx.cfg.normative_dir))
        throw Error(ErrorKind::not_found, "normative directory " + ctx.cfg.normative_dir.string() + " not found");
    for (const auto& f : fs::directory_iterator(ctx.cfg.normative_dir))
        if (f.path().extension() == ".csv") files.push_back(f.path());
    std::sort(files.begin(), files.end());
    std::vector<JointTrajectory> subjects;
    for (const auto& f : files) subjects.push_back(lowpass_filter(load_trajectory(f), ctx.cfg.filter_cutoff_hz));
    NormativeOptions nopts;
    nopts.pooling = ctx.cfg.pooling;
    nopts.phase_mode = ctx.cfg.phase_mode;
    const auto nm = fit_normative_model(subjects, nopts);
    write_json_file(ctx.out("normative_model.json"), to_json(nm));

    std::ostringstream csv;
    csv << "session_id,n_components,t_length,explained_variance,mean_cycle_samples\n";
    const auto caps = captures(ctx);
    for (const auto& cap : caps) {
        const auto t = load_ingested(ctx, cap);
        const auto cycles = segment_cycles(t.trajectory, t.events, ctx.cfg.n_cycles, ctx.cfg.cycle_side);
        ParticipantModelOptions popts;
        popts.variance_threshold = ctx.cfg.variance_threshold;
        const auto pm = fit_participant_model(cycles, popts);
        write_json_file(ctx.out(model_file(cap.session_id)), to_json(pm));
        double explained = 0.0;
        for (std::size_t i = 0; i < pm.n_components; ++i) explained += pm.explained_variance_ratio[i];
        csv << cap.session_id << ',' << pm.n_components << ',' << pm.t_length << ',' << format_number(explained) << ','
            << format_number(pm.mean_cycle_samples, 3) << '\n';
    }
    write_text(ctx.out("fit.csv"), csv.str());
    std::string r2;
    for (double v : nm.fit_r2()) r2 += (r2.empty() ? "" : ", ") + format_number(v, 3);
    ctx.note(Stage::fit, std::to_string(subjects.size()) + " normative walkers (r2 " + r2 + "), " +
                             std::to_string(caps.size()) + " participant models");
}

void stage_synth(const Context& ctx) {
    const auto nm = load_normative(ctx);
    std::map<std::string, SessionCapture> last;
    for (const auto& cap : captures(ctx)) last[cap.participant_id] = cap;  // captures are session-ordered
    std::ostringstream csv;
    csv << "session_id,view,alpha1,frames,jsonl,csv\n";
    for (const auto& [pid, cap] : last) {
        const auto pm = load_model(ctx, cap.session_id);
        const auto aligned = pm.mean_cycle_samples > 0.0 && nm.samples_per_cycle > 0.0
                                 ? align_cadence(nm, pm.mean_cycle_samples)
                                 : nm;
        const GaitBlender blender(pm, aligned);
        const auto own = blender(CoefficientOfMotion(0.0));
        const auto gait = blender(CoefficientOfMotion(ctx.cfg.synth_alpha));
        for (ViewKind v : kAllViews) {
            const auto frames = project(gait, ViewingAngle{v}, fit_screen_mapping(own.samples, ViewingAngle{v}));
            const auto stem = cap.session_id + "." + std::string(to_string(v));
            std::ostringstream jl, pc;
            write_frames_jsonl(jl, frames);
            write_frames_csv(pc, frames);
            write_text(ctx.out(fs::path("synth") / (stem + ".jsonl")), jl.str());
            write_text(ctx.out(fs::path("synth") / (stem + ".csv")), pc.str());
            csv << cap.session_id << ',' << to_string(v) << ',' << format_number(ctx.cfg.synth_alpha, 3) << ','
                << frames.size() << ",synth/" << stem << ".jsonl,synth/" << stem << ".csv\n";
        }
    }
    write_text(ctx.out("synth.csv"), csv.str());
    ctx.note(Stage::synth, std::to_string(last.size()) + " participants x 3 views");
}

void stage_deviation(const Context& ctx) {
    const auto nm = load_normative(ctx);
    std::vector<DeviationRow> rows;
    for (const auto& cap : captures(ctx))
        rows.push_back({cap.session_id, gait_deviation(load_model(ctx, cap.session_id), nm, ctx.cfg.deviation_mode)});
    std::ostringstream csv;
    write_deviation_csv(csv, rows);
    write_text(ctx.out("deviation.csv"), csv.str());
    ctx.note(Stage::deviation, std::to_string(rows.size()) + " sessions");
}

void stage_params(const Context& ctx) {
    std::vector<ParamsRow> rows;
    for (const auto& cap : captures(ctx)) {
        const auto t = load_ingested(ctx, cap);
        GaitParamsOptions opts;
        opts.robotic_side = cap.robotic_side;
        if (ctx.cfg.belt_corrected_step_length) opts.belt_speed_mps = cap.speed_mps;
        try {
            rows.push_back({cap.session_id, compute_gait_params(t.trajectory, t.events, opts)});
        } catch (const Error& e) {
            throw Error(e.kind(), cap.session_id + ": " + e.what());
        }
    }
    std::ostringstream csv;
    write_params_csv(csv, rows);
    write_text(ctx.out("params.csv"), csv.str());
    ctx.note(Stage::params, std::to_string(rows.size()) + " sessions");
}

struct SelectionRow {
    std::string participant_id;
    int day = 1, session_index = 1;
    ViewKind view = ViewKind::frontal;
    int repeat = 1;
    double alpha1 = 0.0;
};

std::vector<SelectionRow> read_selections(const fs::path& path) {
    const CsvTable t(path);
    t.require({"participant_id", "day", "session", "view", "repeat", "alpha1"});
    std::vector<SelectionRow> out;
    for (std::size_t i = 0; i < t.size(); ++i) {
        SelectionRow r;
        r.participant_id = t.at(i, "participant_id");
        r.day = to_int(t.at(i, "day"), t.where(i, "day"));
        r.session_index = to_int(t.at(i, "session"), t.where(i, "session"));
        r.view = parse_view(t.at(i, "view"));
        r.repeat = to_int(t.at(i, "repeat"), t.where(i, "repeat"));
        r.alpha1 = to_double(t.at(i, "alpha1"), t.where(i, "alpha1"));
        out.push_back(r);
    }
    return out;
}

std::map<std::string, GaitParameterSet> load_params(const Context& ctx) {
    std::ifstream in(ctx.out("params.csv"));
    if (!in) throw Error(ErrorKind::not_found, "no params.csv (run params)");
    std::map<std::string, GaitParameterSet> out;
    for (auto& row : read_params_csv(in)) out.emplace(row.session_id, row.params);
    return out;
}

void stage_correlate(const Context& ctx) {
    const auto params = load_params(ctx);
    // (participant, session number) -> view -> selections
    std::map<std::pair<std::string, int>, std::map<ViewKind, std::vector<double>>> by_session;
    for (const auto& s : read_selections(ctx.cfg.selections))
        by_session[{s.participant_id, session_number(s.day, s.session_index)}][s.view].push_back(s.alpha1);

    std::ostringstream scomo;
    scomo << "participant_id,session_id,session_number,view,mean,sd,n_repeats\n";
    std::map<ViewKind, std::vector<CorrelationRow>> corr;
    std::map<std::string, std::vector<std::pair<std::string, std::map<ViewKind, double>>>> series;
    for (const auto& [key, views] : by_session) {
        const auto& [pid, number] = key;
        const auto sid = session_id(pid, (number - 1) / kSessionsPerDay + 1, (number - 1) % kSessionsPerDay + 1);
        std::map<ViewKind, double> means;
        for (const auto& [view, values] : views) {
            const auto sm = summarize_selections(values, ViewingAngle{view});
            scomo << pid << ',' << sid << ',' << number << ',' << to_string(view) << ','
                  << format_number(sm.mean_scomo) << ',' << format_number(sm.sd_scomo) << ',' << sm.n_repeats << '\n';
            means[view] = sm.mean_scomo;
        }
        series[pid].emplace_back(sid, std::move(means));
    }
    write_text(ctx.out("scomo.csv"), scomo.str());

    std::size_t reported = 0;
    for (const auto& [pid, sessions] : series) {
        for (ViewKind v : kAllViews) {
            std::vector<GaitParameterSet> p;
            std::vector<double> y;
            for (const auto& [sid, means] : sessions) {
                const auto it = params.find(sid);
                const auto m = means.find(v);
                if (it == params.end() || m == means.end()) continue;
                p.push_back(it->second);
                y.push_back(m->second);
            }
            if (p.size() < 3) continue;
            corr[v].push_back({pid, correlate_with_scomo(p, y, ViewingAngle{v})});
        }
        ++reported;
    }
    for (ViewKind v : kAllViews) {
        std::ostringstream csv;
        write_correlation_csv(csv, corr[v]);
        write_text(ctx.out("correlation_" + std::string(to_string(v)) + ".csv"), csv.str());
    }
    ctx.note(Stage::correlate, std::to_string(reported) + " participants");
}

void stage_report(const Context& ctx) {
    const auto store = ctx.out("store");
    fs::remove_all(store);
    SessionService::Options opts;
    opts.store_dir = store;
    opts.seed = ctx.cfg.seed;
    opts.normative_model = load_normative(ctx);
    opts.deviation_mode = ctx.cfg.deviation_mode;
    opts.display_fps = ctx.cfg.display_fps;
    auto tick = std::make_shared<std::uint64_t>(0);
    opts.clock = [tick] {
        char buf[32];
        std::snprintf(buf, sizeof buf, "T+%08llu", static_cast<unsigned long long>((*tick)++));
        return std::string(buf);
    };
    SessionService svc(opts);

    const auto params = load_params(ctx);
    std::map<std::tuple<std::string, int, int>, std::vector<SelectionRow>> selections;
    for (const auto& s : read_selections(ctx.cfg.selections))
        selections[{s.participant_id, s.day, s.session_index}].push_back(s);
    std::set<std::string> captured;
    for (const auto& cap : captures(ctx)) captured.insert(cap.session_id);

    auto rows = read_trial_manifest(ctx.cfg.trials);
    std::stable_sort(rows.begin(), rows.end(), [](const TrialRow& a, const TrialRow& b) {
        return std::tuple(a.participant_id, session_number(a.day, a.session_index), a.trial) <
               std::tuple(b.participant_id, session_number(b.day, b.session_index), b.trial);
    });

    std::size_t completed = 0;
    for (std::size_t i = 0; i < rows.size();) {
        std::size_t j = i;
        while (j < rows.size() && rows[j].participant_id == rows[i].participant_id && rows[j].day == rows[i].day &&
               rows[j].session_index == rows[i].session_index)
            ++j;
        const auto& first = rows[i];
        const auto sid = session_id(first.participant_id, first.day, first.session_index);
        try {
            svc.create_session(first.participant_id, first.day, first.session_index);
            for (std::size_t k = i; k < j; ++k) {
                svc.record_trial(sid, TrialInput{rows[k].trial, rows[k].speed_mps, rows[k].handrail_free});
                if (rows[k].speed_request) svc.request_speed_change(sid, *rows[k].speed_request);
            }
            const auto sel = selections.find({first.participant_id, first.day, first.session_index});
            if (captured.count(sid) && sel != selections.end()) {
                EvaluationInput in;
                in.participant_model = load_model(ctx, sid);
                if (const auto p = params.find(sid); p != params.end()) in.gait_params = p->second;
                const auto s = svc.begin_evaluation(sid, std::move(in));
                for (const auto& slot : s.evaluation->slots) {
                    const auto hit = std::find_if(sel->second.begin(), sel->second.end(), [&](const SelectionRow& r) {
                        return r.view == slot.view && r.repeat == slot.repeat_index;
                    });
                    if (hit == sel->second.end())
                        throw Error(ErrorKind::invalid_data, "no selection for slot " + slot.id);
                    svc.record_selection(slot.id, hit->alpha1);
                }
                ++completed;
            }
        } catch (const Error& e) {
            throw Error(e.kind(), sid + ": " + e.what());
        }
        i = j;
    }
    if (ctx.cfg.confidence) {
        const CsvTable t(*ctx.cfg.confidence);
        t.require({"participant_id", "day", "rating"});
        for (std::size_t i = 0; i < t.size(); ++i) {
            std::vector<std::string> cues;
            if (t.has("cues")) {
                std::istringstream in(t.at(i, "cues"));
                for (std::string c; std::getline(in, c, ';');)
                    if (!trim(c).empty()) cues.push_back(trim(c));
            }
            svc.record_confidence(t.at(i, "participant_id"), to_int(t.at(i, "day"), t.where(i, "day")),
                                  to_int(t.at(i, "rating"), t.where(i, "rating")), std::move(cues));
        }
    }

    const auto cohort = svc.export_cohort_report();
    write_json_file(ctx.out("report.json"), cohort);
    write_json_file(ctx.out("stats.json"), {{"format_version", kModelFormatVersion},
                                            {"kind", "mixed_models"},
                                            {"metadata", cohort.at("metadata")},
                                            {"mixed_models", cohort.at("mixed_models")}});
    std::size_t reports = 0;
    for (const auto& pid : svc.participant_ids()) {
        try {
            write_json_file(ctx.out(fs::path("reports") / (pid + ".json")), svc.export_report(pid));
            ++reports;
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::not_found) throw;
        }
    }
    ctx.note(Stage::report, std::to_string(completed) + " evaluations, " + std::to_string(reports) +
                                " participant reports");
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

}  // namespace

StageResult run_pipeline(const PipelineConfig& cfg, std::span<const Stage> stages, std::ostream* log) {
    const Context ctx{cfg, log};
    fs::create_directories(cfg.output_dir);
    fs::remove(cfg.output_dir / "error.json");
    for (Stage s : stages) {
        std::string kind, message;
        try {
            switch (s) {
                case Stage::ingest: stage_ingest(ctx); break;
                case Stage::fit: stage_fit(ctx); break;
                case Stage::synth: stage_synth(ctx); break;
                case Stage::deviation: stage_deviation(ctx); break;
                case Stage::params: stage_params(ctx); break;
                case Stage::correlate: stage_correlate(ctx); break;
                case Stage::report: stage_report(ctx); break;
            }
            continue;
        } catch (const Error& e) {
            kind = kind_name(e.kind());
            message = e.what();
        } catch (const std::exception& e) {
            kind = "internal";
            message = e.what();
        }
        write_json_file(cfg.output_dir / "error.json", {{"stage", to_string(s)}, {"kind", kind}, {"message", message}});
        if (log) *log << '[' << to_string(s) << "] error: " << message << '\n';
        return {2, s, message};
    }
    return {};
}

StageResult run_pipeline(const PipelineConfig& cfg, std::ostream* log) { return run_pipeline(cfg, kAllStages, log); }

}  // namespace scomo
