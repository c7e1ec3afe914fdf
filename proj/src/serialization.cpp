#include "scomo/serialization.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "scomo/error.hpp"

namespace scomo {

using nlohmann::json;

namespace {

void require_version(const json& j, std::string_view kind) {
    if (!j.is_object() || j.value("format_version", 0) != kModelFormatVersion)
        throw Error(ErrorKind::invalid_data, std::string(kind) + ": unsupported or missing format_version");
    if (j.value("kind", std::string{}) != kind)
        throw Error(ErrorKind::invalid_data, "expected a " + std::string(kind) + " document");
}

std::vector<double> vector_from(const json& j, std::size_t expected, std::string_view what) {
    auto v = j.get<std::vector<double>>();
    if (expected != 0 && v.size() != expected)
        throw Error(ErrorKind::invalid_data, std::string(what) + ": expected " + std::to_string(expected) + " values");
    return v;
}

json valued(double v, std::string_view units) { return {{"value", v}, {"units", units}}; }

}  // namespace

json matrix_to_json(const Matrix& m, std::string_view units) {
    json j = {{"shape", {m.rows(), m.cols()}}, {"data", m.values()}};
    if (!units.empty()) j["units"] = units;
    return j;
}

Matrix matrix_from_json(const json& j) {
    const auto shape = j.at("shape").get<std::vector<std::size_t>>();
    if (shape.size() != 2) throw Error(ErrorKind::invalid_data, "matrix: shape must have two entries");
    const auto data = j.at("data").get<std::vector<double>>();
    if (data.size() != shape[0] * shape[1]) throw Error(ErrorKind::invalid_data, "matrix: data does not match shape");
    Matrix m(shape[0], shape[1]);
    std::copy(data.begin(), data.end(), m.data());
    return m;
}

json to_json(const ParticipantModel& m) {
    return {
        {"format_version", kModelFormatVersion},
        {"kind", "participant_model"},
        {"n_components", m.n_components},
        {"t_length", m.t_length},
        {"rate_hz", m.rate_hz},
        {"mean_cycle_samples", m.mean_cycle_samples},
        {"mean_posture", {{"shape", {m.mean_posture.size()}}, {"units", "m"}, {"data", m.mean_posture}}},
        {"loadings", matrix_to_json(m.loadings)},
        {"scores", matrix_to_json(m.scores, "m")},
        {"explained_variance_ratio", m.explained_variance_ratio},
    };
}

ParticipantModel participant_model_from_json(const json& j) {
    require_version(j, "participant_model");
    ParticipantModel m;
    m.n_components = j.at("n_components").get<std::size_t>();
    m.t_length = j.at("t_length").get<std::size_t>();
    m.rate_hz = j.at("rate_hz").get<double>();
    m.mean_cycle_samples = j.value("mean_cycle_samples", 0.0);
    m.mean_posture = vector_from(j.at("mean_posture").at("data"), kChannelCount, "mean_posture");
    m.loadings = matrix_from_json(j.at("loadings"));
    m.scores = matrix_from_json(j.at("scores"));
    m.explained_variance_ratio = j.at("explained_variance_ratio").get<std::vector<double>>();
    if (m.loadings.rows() != m.n_components || m.loadings.cols() != kChannelCount ||
        m.scores.rows() != m.t_length || m.scores.cols() != m.n_components)
        throw Error(ErrorKind::invalid_data, "participant_model: inconsistent shapes");
    return m;
}

json to_json(const NormativeModel& m) {
    json sinusoids = json::array();
    for (const auto& s : m.sinusoids)
        sinusoids.push_back({{"amplitude", valued(s.amplitude, "score")},
                             {"omega", valued(s.omega, "rad/sample")},
                             {"phase", valued(s.phase, "rad")},
                             {"r2", s.r2},
                             {"iterations", s.iterations}});
    return {
        {"format_version", kModelFormatVersion},
        {"kind", "normative_model"},
        {"loadings", matrix_to_json(m.loadings)},
        {"sinusoids", sinusoids},
        {"explained_variance_ratio", m.explained_variance_ratio},
        {"pooling", to_string(m.pooling)},
        {"phase_mode", to_string(m.phase_mode)},
        {"samples_per_cycle", m.samples_per_cycle},
        {"n_subjects", m.n_subjects},
    };
}

NormativeModel normative_model_from_json(const json& j) {
    require_version(j, "normative_model");
    NormativeModel m;
    m.loadings = matrix_from_json(j.at("loadings"));
    for (const auto& s : j.at("sinusoids")) {
        SinusoidFit f;
        f.amplitude = s.at("amplitude").at("value").get<double>();
        f.omega = s.at("omega").at("value").get<double>();
        f.phase = s.at("phase").at("value").get<double>();
        f.r2 = s.at("r2").get<double>();
        f.iterations = s.value("iterations", 0);
        m.sinusoids.push_back(f);
    }
    m.explained_variance_ratio = j.at("explained_variance_ratio").get<std::vector<double>>();
    const auto pooling = j.at("pooling").get<std::string>();
    if (pooling == "time_normalized") m.pooling = NormativePooling::time_normalized;
    else if (pooling == "raw_concat") m.pooling = NormativePooling::raw_concat;
    else throw Error(ErrorKind::invalid_data, "normative_model: unknown pooling '" + pooling + "'");
    const auto phase = j.at("phase_mode").get<std::string>();
    if (phase == "free") m.phase_mode = PhaseMode::free;
    else if (phase == "none") m.phase_mode = PhaseMode::none;
    else throw Error(ErrorKind::invalid_data, "normative_model: unknown phase_mode '" + phase + "'");
    m.samples_per_cycle = j.value("samples_per_cycle", 0.0);
    m.n_subjects = j.value("n_subjects", std::size_t{0});
    if (m.loadings.rows() != kNormativeComponents || m.loadings.cols() != kChannelCount ||
        m.sinusoids.size() != kNormativeComponents)
        throw Error(ErrorKind::invalid_data, "normative_model: expected 4 components over 45 channels");
    return m;
}

json to_json(const GaitParameterSet& p) {
    return {{"trunk_ml", valued(p.trunk_ml, "m")},     {"trunk_lean", valued(p.trunk_lean, "deg")},
            {"robot_st", valued(p.robot_st, "s")},     {"ctl_st", valued(p.ctl_st, "s")},
            {"robot_sl", valued(p.robot_sl, "m")},     {"ctl_sl", valued(p.ctl_sl, "m")},
            {"st_si", valued(p.st_si, "%")},           {"sl_si", valued(p.sl_si, "%")}};
}

GaitParameterSet gait_params_from_json(const json& j) {
    auto get = [&](const char* k) { return j.at(k).at("value").get<double>(); };
    return {get("trunk_ml"), get("trunk_lean"), get("robot_st"), get("ctl_st"),
            get("robot_sl"), get("ctl_sl"),     get("st_si"),    get("sl_si")};
}

json to_json(const GaitEvents& e) {
    auto side = [](const SideEvents& s) { return json{{"heel_strikes", s.heel_strikes}, {"toe_offs", s.toe_offs}}; };
    return {{"robotic", side(e.robotic)}, {"contralateral", side(e.contralateral)}, {"warnings", e.warnings}};
}

json to_json(const DeviationValue& d) {
    return {{"mode", to_string(d.mode)},
            {"value", d.value},
            {"units", d.mode == DeviationMode::sum_angles ? "deg" : "cosine sum"},
            {"m", d.m}};
}

json to_json(const MixedModelFit& f) {
    json ri = json::object();
    for (std::size_t i = 0; i < f.groups.size(); ++i) ri[f.groups[i]] = f.random_intercepts[i];
    return {
        {"fixed_intercept", f.fixed_intercept},
        {"fixed_slope", f.fixed_slope},
        {"slope_se", f.slope_se},
        {"t_stat", f.t_stat},
        {"p_value", f.p_value},
        {"degrees_of_freedom", f.degrees_of_freedom},
        {"random_intercepts", ri},
        {"sigma_between", f.sigma_between},
        {"sigma_within", f.sigma_within},
        {"variance_ratio", f.variance_ratio},
        {"log_likelihood", f.log_likelihood},
        {"n_observations", f.n_observations},
        {"metadata",
         {{"method", kMixedModelMethod},
          {"p_value_method", kPValueMethod},
          {"iterations", f.iterations},
          {"converged", f.converged}}},
    };
}

json to_json(const SelectionSummary& s) {
    return {{"view", to_string(s.view.kind)}, {"mean_scomo", s.mean_scomo}, {"sd_scomo", s.sd_scomo}, {"n_repeats", s.n_repeats}};
}

json to_json(const CorrelationReport& r) {
    json params = json::array();
    for (const auto& c : r.parameters)
        params.push_back({{"parameter", c.parameter},
                          {"pearson_r", c.pearson_r ? json(*c.pearson_r) : json(nullptr)},
                          {"r_squared", c.r_squared ? json(*c.r_squared) : json(nullptr)},
                          {"n_points", c.n_points},
                          {"salient", c.salient},
                          {"defined", c.pearson_r.has_value()}});
    return {{"view", to_string(r.view.kind)}, {"salience_r2", kSalienceR2}, {"parameters", params}};
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorKind::io, "cannot write " + tmp.string());
        out << contents;
        if (!out.flush()) throw Error(ErrorKind::io, "write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::not_found, "cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::invalid_data, path.string() + ": " + e.what());
    }
}

void write_json_file(const std::filesystem::path& path, const json& j) { write_file_atomic(path, j.dump(2) + "\n"); }

std::string format_number(double v, int precision) {
    char buf[64];
    const int n = std::snprintf(buf, sizeof buf, "%.*f", precision, v);
    std::string s(buf, static_cast<std::size_t>(n));
    if (s.front() == '-' && s.find_first_not_of("-0.") == std::string::npos) s.erase(0, 1);
    return s;
}

void write_deviation_csv(std::ostream& out, std::span<const DeviationRow> rows) {
    out << "session_id,mode,value,m\n";
    for (const auto& r : rows)
        out << r.session_id << ',' << to_string(r.value.mode) << ',' << format_number(r.value.value) << ','
            << r.value.m << '\n';
}

void write_params_csv(std::ostream& out, std::span<const ParamsRow> rows) {
    out << "session_id";
    for (auto name : kGaitParameterNames) out << ',' << name;
    out << '\n';
    for (const auto& r : rows) {
        out << r.session_id;
        for (double v : as_array(r.params)) out << ',' << format_number(v);
        out << '\n';
    }
}

std::vector<ParamsRow> read_params_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line.rfind("session_id", 0) != 0)
        throw Error(ErrorKind::invalid_data, "params CSV: missing header");
    std::vector<ParamsRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream fields(line);
        std::string cell;
        ParamsRow row;
        std::getline(fields, row.session_id, ',');
        std::array<double, kGaitParameterCount> v{};
        for (auto& x : v) {
            if (!std::getline(fields, cell, ','))
                throw Error(ErrorKind::invalid_data, "params CSV: short row for " + row.session_id);
            x = std::stod(cell);
        }
        row.params = {v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7]};
        rows.push_back(std::move(row));
    }
    return rows;
}

void write_correlation_csv(std::ostream& out, std::span<const CorrelationRow> rows) {
    out << "participant_id,view,parameter,pearson_r,r_squared,n_points,salient\n";
    for (const auto& r : rows)
        for (const auto& c : r.report.parameters)
            out << r.participant_id << ',' << to_string(r.report.view.kind) << ',' << c.parameter << ','
                << (c.pearson_r ? format_number(*c.pearson_r) : "undefined") << ','
                << (c.r_squared ? format_number(*c.r_squared) : "undefined") << ',' << c.n_points << ','
                << (c.salient ? "true" : "false") << '\n';
}

}  // namespace scomo
