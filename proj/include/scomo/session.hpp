#pragma once

// Experiment-protocol service: trial bookkeeping, speed progression, SCoMo
// evaluation blocks with hidden-alpha sliders, and an append-only event log.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "scomo/gait_model.hpp"
#include "scomo/gait_params.hpp"
#include "scomo/similarity.hpp"
#include "scomo/stats.hpp"
#include "scomo/synthesis.hpp"

namespace scomo {

// Speeds are counted in 0.05 m/s steps.
inline constexpr double kSpeedStepMps = 0.05;
inline constexpr int kDay1StartSpeedSteps = 6;  // 0.30 m/s
inline constexpr int kDay1MaxSpeedSteps = 10;   // 0.50 m/s
inline constexpr int kDays = 4;
inline constexpr int kSessionsPerDay = 3;
inline constexpr std::size_t kTrialsPerSession = 6;
inline constexpr std::size_t kTrialsPerBlock = 3;
inline constexpr std::size_t kRepeatsPerView = 6;
inline constexpr std::size_t kSlotsPerEvaluation = kRepeatsPerView * kAllViews.size();
inline constexpr int kConfidenceMin = 1;
inline constexpr int kConfidenceMax = 10;
inline constexpr double kNominalTrialSeconds = 120.0;

double speed_mps(int steps);
/// Rejects speeds that are not a multiple of 0.05 m/s within 1e-9.
int speed_steps(double mps);

/// Session number 1..12 across the four days.
int session_number(int day, int session_index);
std::string session_id(std::string_view participant_id, int day, int session_index);
std::string slot_id(std::string_view session_id, ViewKind view, int repeat_index);

enum class SessionPhase { training, evaluation, complete };
std::string_view to_string(SessionPhase phase);

struct Trial {
    int index = 0;  // 1..6
    int speed_steps = 0;
    bool handrail_free = false;
    double duration_s = kNominalTrialSeconds;

    double speed() const { return speed_mps(speed_steps); }
};

/// splitmix64 step; used to derive per-slot and per-session seeds.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index);

struct SliderConfig {
    double min_alpha = -5.0;
    double max_alpha = 5.0;
    double initial_alpha = 0.0;
    std::uint64_t seed = 0;

    double alpha_at(double position) const;
    double position_of(double alpha1) const;
};

inline constexpr double kSliderMinLow = -5.0, kSliderMinHigh = -4.5;
inline constexpr double kSliderMaxLow = 4.5, kSliderMaxHigh = 5.0;

/// Bounds and start value drawn from a generator seeded with `seed`.
SliderConfig make_slider_config(std::uint64_t seed);

struct SelectionSlot {
    std::string id;
    ViewKind view = ViewKind::frontal;
    int repeat_index = 0;  // 1..6
    SliderConfig slider;
    std::optional<double> alpha1;  // the SCoMo once selected
    double position = 0.0;
    std::string timestamp;
};

struct EvaluationPlan {
    std::uint64_t seed = 0;
    std::vector<SelectionSlot> slots;
    ParticipantModel participant_model;
    NormativeModel normative_model;
    DeviationValue deviation;
    std::optional<GaitParameterSet> gait_params;
    std::vector<SelectionSummary> summaries;  // filled on completion

    std::size_t selected_count() const;
    const SelectionSlot* next_open() const;
};

struct SpeedDecision {
    int direction = 0;
    bool granted = false;
    int speed_before = 0;
    int speed_after = 0;
    std::size_t block = 0;  // 1 or 2 within the session
    std::string reason;
};

/// Pure speed rule for days 2-4: an increase needs at least two of the three
/// block trials without handrail support; decrease and maintain are always
/// granted; speed never drops below 0.
SpeedDecision decide_speed_change(int day, int direction, std::span<const Trial> block, int current_steps);

struct ExperimentSession {
    std::string id;
    std::string participant_id;
    int day = 1;
    int session_index = 1;
    SessionPhase phase = SessionPhase::training;
    int start_speed_steps = kDay1StartSpeedSteps;
    int speed_steps = kDay1StartSpeedSteps;  // speed of the next trial, end speed once trials are done
    std::vector<Trial> trials;
    std::vector<SpeedDecision> speed_decisions;
    std::optional<EvaluationPlan> evaluation;

    int number() const { return session_number(day, session_index); }
};

struct ConfidenceReport {
    std::string participant_id;
    int day = 1;
    int rating = kConfidenceMin;
    std::vector<std::string> cues;
    std::string timestamp;
};

struct ParticipantRecord {
    std::string id;
    std::vector<ExperimentSession> sessions;  // ordered by (day, session_index)
    std::vector<ConfidenceReport> confidence;
    std::uint64_t next_seq = 1;

    const ExperimentSession* find(std::string_view session_id) const;
    ExperimentSession* find(std::string_view session_id);
};

/// Applies one logged event. Live mutations and replay share this path.
void apply_event(ParticipantRecord& record, const nlohmann::json& event);

/// Rebuilds a participant from its event log.
ParticipantRecord replay(std::string_view participant_id, std::span<const nlohmann::json> events);

/// Full state, including models, for replay comparisons.
nlohmann::json state_json(const ParticipantRecord& record);

struct TrialInput {
    std::optional<int> index;
    std::optional<double> speed_mps;  // must match the scheduled speed when given
    bool handrail_free = false;
    double duration_s = kNominalTrialSeconds;
};

struct EvaluationInput {
    ParticipantModel participant_model;
    std::optional<NormativeModel> normative_model;  // defaults to the service's model
    std::optional<GaitParameterSet> gait_params;
    std::optional<std::uint64_t> seed;
};

/// Display-channel view of a slot. Carries no alpha.
struct DisplaySlot {
    std::string id;
    ViewKind view = ViewKind::frontal;
    int repeat_index = 0;
    bool selected = false;
    double initial_position = 0.0;  // in [0, 1]
    double slider_scale = 1.0;      // slider span relative to the full [-5, 5] range
};

struct FramesPayload {
    std::string slot_id;
    ViewKind view = ViewKind::frontal;
    double position = 0.0;
    double fps = kDefaultDisplayFps;
    std::vector<PointLightFrame> frames;  // one loop at `fps`
};

class SessionService {
public:
    struct Options {
        std::optional<std::filesystem::path> store_dir;
        std::uint64_t seed = 0;
        std::optional<NormativeModel> normative_model;
        std::function<std::string()> clock;  // defaults to UTC wall time
        double display_fps = kDefaultDisplayFps;
        DeviationMode deviation_mode = DeviationMode::sum_angles;
    };

    explicit SessionService(Options options);
    ~SessionService();

    SessionService(const SessionService&) = delete;
    SessionService& operator=(const SessionService&) = delete;

    ExperimentSession create_session(const std::string& participant_id, int day, int session_index);
    ExperimentSession record_trial(const std::string& session_id, const TrialInput& trial);
    SpeedDecision request_speed_change(const std::string& session_id, int direction);
    ExperimentSession begin_evaluation(const std::string& session_id, EvaluationInput input);

    /// Operator path: the SCoMo value itself.
    ExperimentSession record_selection(const std::string& slot_id, double alpha1);
    /// Display path: slider position in [0, 1], resolved to alpha here.
    ExperimentSession record_selection_at(const std::string& slot_id, double position);

    ConfidenceReport record_confidence(const std::string& participant_id, int day, int rating,
                                       std::vector<std::string> cues);

    std::vector<DisplaySlot> display_slots(const std::string& session_id) const;
    FramesPayload frames_for_slot(const std::string& slot_id, double position,
                                  std::optional<ViewKind> view = std::nullopt) const;

    ExperimentSession session(const std::string& session_id) const;
    ParticipantRecord participant(const std::string& participant_id) const;
    std::vector<std::string> participant_ids() const;
    std::vector<nlohmann::json> event_log(const std::string& participant_id) const;

    nlohmann::json export_report(const std::string& participant_id) const;
    nlohmann::json export_cohort_report() const;

    const Options& options() const noexcept { return options_; }

private:
    struct Entry;

    std::shared_ptr<Entry> entry(const std::string& participant_id) const;
    std::shared_ptr<Entry> entry_for_session(const std::string& session_id) const;
    std::shared_ptr<Entry> entry_or_create(const std::string& participant_id);
    void commit(Entry& e, nlohmann::json event);
    std::string now() const;

    Options options_;
    mutable std::shared_mutex map_mutex_;
    std::map<std::string, std::shared_ptr<Entry>> entries_;
};

/// Client-bound JSON forms. None of them carries an alpha value.
nlohmann::json display_json(const ExperimentSession& s);
nlohmann::json display_json(const DisplaySlot& slot);
nlohmann::json display_json(const FramesPayload& frames);
nlohmann::json display_json(const SpeedDecision& d);
nlohmann::json display_json(const ConfidenceReport& c);

}  // namespace scomo
