#pragma once

// JSON and CSV forms of the models and reports. Matrices are stored as
// {"shape": [rows, cols], "data": [...row-major...]}.

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "scomo/gait_model.hpp"
#include "scomo/gait_params.hpp"
#include "scomo/similarity.hpp"
#include "scomo/stats.hpp"

namespace scomo {

inline constexpr int kModelFormatVersion = 1;

nlohmann::json matrix_to_json(const Matrix& m, std::string_view units = {});
Matrix matrix_from_json(const nlohmann::json& j);

nlohmann::json to_json(const ParticipantModel& m);
ParticipantModel participant_model_from_json(const nlohmann::json& j);

nlohmann::json to_json(const NormativeModel& m);
NormativeModel normative_model_from_json(const nlohmann::json& j);

nlohmann::json to_json(const GaitParameterSet& p);
GaitParameterSet gait_params_from_json(const nlohmann::json& j);

nlohmann::json to_json(const GaitEvents& e);
nlohmann::json to_json(const DeviationValue& d);
nlohmann::json to_json(const MixedModelFit& f);
nlohmann::json to_json(const SelectionSummary& s);
nlohmann::json to_json(const CorrelationReport& r);

/// Writes to a sibling temporary file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);
nlohmann::json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const nlohmann::json& j);

/// Fixed-precision decimal used by every CSV report so outputs are
/// byte-stable.
std::string format_number(double v, int precision = 9);

struct DeviationRow {
    std::string session_id;
    DeviationValue value;
};
void write_deviation_csv(std::ostream& out, std::span<const DeviationRow> rows);

struct ParamsRow {
    std::string session_id;
    GaitParameterSet params;
};
void write_params_csv(std::ostream& out, std::span<const ParamsRow> rows);
std::vector<ParamsRow> read_params_csv(std::istream& in);

struct CorrelationRow {
    std::string participant_id;
    CorrelationReport report;
};
void write_correlation_csv(std::ostream& out, std::span<const CorrelationRow> rows);

}  // namespace scomo
