#pragma once

// Batch pipeline: ingest -> fit -> synth / deviation / params -> correlate ->
// report. Every stage writes its files under the output directory and can run
// on its own from the files of earlier stages.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "scomo/gait_model.hpp"
#include "scomo/mocap.hpp"
#include "scomo/similarity.hpp"

namespace scomo {

inline constexpr int kConfigVersion = 1;

struct PipelineConfig {
    std::filesystem::path trials;         // trial manifest CSV
    std::filesystem::path normative_dir;  // one trajectory CSV per normative walker
    std::filesystem::path selections;     // SCoMo selections CSV
    std::optional<std::filesystem::path> confidence;
    std::filesystem::path output_dir;

    double filter_cutoff_hz = 6.0;
    double event_threshold_n = 20.0;
    double debounce_ms = 20.0;
    std::size_t n_cycles = 8;
    Side cycle_side = Side::robotic;
    double edge_guard_s = 1.2;  // events this close to either trial end are ignored
    double variance_threshold = 0.95;
    DeviationMode deviation_mode = DeviationMode::sum_angles;
    NormativePooling pooling = NormativePooling::time_normalized;
    PhaseMode phase_mode = PhaseMode::free;
    bool belt_corrected_step_length = false;
    double synth_alpha = 0.0;
    double display_fps = 50.0;
    std::uint64_t seed = 0;
};

/// key = value lines, '#' comments. Relative paths resolve against
/// `base_dir`. `config_version` is required.
PipelineConfig parse_config(std::istream& in, const std::filesystem::path& base_dir);
PipelineConfig load_config(const std::filesystem::path& path);
std::string format_config(const PipelineConfig& config);

enum class Stage { ingest, fit, synth, deviation, params, correlate, report };

inline constexpr Stage kAllStages[] = {Stage::ingest, Stage::fit,    Stage::synth, Stage::deviation,
                                       Stage::params, Stage::correlate, Stage::report};

std::string_view to_string(Stage stage);
Stage parse_stage(std::string_view text);

/// One row of the trial manifest.
struct TrialRow {
    std::string participant_id;
    int day = 1;
    int session_index = 1;
    int trial = 1;
    double speed_mps = 0.0;
    bool handrail_free = false;
    std::optional<int> speed_request;
    BodySide robotic_side = BodySide::right;
    std::filesystem::path trajectory;  // empty when no capture was kept
    std::filesystem::path grf_robotic;
    std::filesystem::path grf_contralateral;
};

std::vector<TrialRow> read_trial_manifest(const std::filesystem::path& path);

/// Motion data of one session: the last trial that has a capture.
struct SessionCapture {
    std::string participant_id;
    std::string session_id;
    int day = 1;
    int session_index = 1;
    BodySide robotic_side = BodySide::right;
    double speed_mps = 0.0;
    std::filesystem::path trajectory;
    std::filesystem::path grf_robotic;
    std::filesystem::path grf_contralateral;
};

std::vector<SessionCapture> session_captures(const std::vector<TrialRow>& rows);

struct IngestedTrial {
    JointTrajectory trajectory;  // filtered
    GaitEvents events;           // edge-guarded
};

IngestedTrial ingest_capture(const SessionCapture& capture, const PipelineConfig& config);

struct StageResult {
    int exit_code = 0;  // 0 ok, 2 stage error
    std::optional<Stage> failed_stage;
    std::string message;
};

/// Runs `stages` in order and stops at the first failure, leaving
/// error.json (stage, kind, message) in the output directory.
StageResult run_pipeline(const PipelineConfig& config, std::span<const Stage> stages, std::ostream* log = nullptr);
StageResult run_pipeline(const PipelineConfig& config, std::ostream* log = nullptr);

}  // namespace scomo
