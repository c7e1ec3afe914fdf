#pragma once

// Synthesized point-light walkers blended between a participant's motion
// and normative walking.

#include <array>
#include <cstddef>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "scomo/gait_model.hpp"
#include "scomo/linalg.hpp"
#include "scomo/mocap.hpp"

namespace scomo {

/// Slider coefficient alpha1 in [-5, 5]. alpha1 = 0 is the participant's own
/// motion, 5 is normative walking, -5 doubles the participant's variation.
class CoefficientOfMotion {
public:
    static constexpr double kMin = -5.0;
    static constexpr double kMax = 5.0;

    explicit CoefficientOfMotion(double alpha1);

    double alpha1() const noexcept { return alpha1_; }
    /// Clamped value used on the normative term.
    double alpha() const noexcept { return alpha1_ >= 0.0 ? alpha1_ : 0.0; }

    double participant_weight() const noexcept { return (kMax - alpha1_) / kMax; }
    double normative_weight() const noexcept { return alpha() / kMax; }

private:
    double alpha1_;
};

enum class ViewKind { frontal, robotic_45, contralateral_45 };

inline constexpr std::array<ViewKind, 3> kAllViews = {ViewKind::frontal, ViewKind::robotic_45,
                                                      ViewKind::contralateral_45};

std::string_view to_string(ViewKind kind);
ViewKind parse_view(std::string_view text);

struct ViewingAngle {
    ViewKind kind = ViewKind::frontal;

    /// Rotation about the vertical axis: 0, +45 (toward the robotic leg) or -45.
    double yaw_deg() const noexcept;
};

struct SynthesizedGait {
    Matrix samples;  // S, t x 45
    double alpha1 = 0.0;
    double rate_hz = 100.0;
    std::string participant_id;
    std::string normative_id;
};

/// Caches P, N and C for one participant/normative pair so slider updates
/// only pay for the blend.
class GaitBlender {
public:
    GaitBlender(const ParticipantModel& participant, const NormativeModel& normative);

    SynthesizedGait operator()(CoefficientOfMotion alpha1) const;

    const Matrix& participant_motion() const noexcept { return p_; }
    const Matrix& normative_motion() const noexcept { return n_; }
    const Matrix& mean_posture() const noexcept { return c_; }

private:
    Matrix p_;
    Matrix n_;
    Matrix c_;  // C broadcast over time
    double rate_hz_;
};

/// S = C + (5 - alpha1)/5 P + alpha/5 N.
SynthesizedGait blend(const ParticipantModel& participant, const NormativeModel& normative,
                      CoefficientOfMotion alpha1);

struct PointLightFrame {
    std::size_t frame_index = 0;
    std::array<std::array<double, 2>, kJointCount> points{};  // (u, v) in [0,1]^2, v up
};

/// Screen-plane coordinates before normalization.
struct ProjectedPoint {
    double u = 0.0;  // horizontal
    double v = 0.0;  // vertical
    double depth = 0.0;
};

ProjectedPoint project_point(double x, double y, double z, double yaw_deg);

/// Affine map from projected coordinates to [0,1]^2 with a uniform scale.
struct ScreenMapping {
    double center_u = 0.0;
    double center_v = 0.0;
    double scale = 1.0;
};

inline constexpr double kScreenMargin = 0.05;

ScreenMapping fit_screen_mapping(const Matrix& samples, ViewingAngle view, double margin = kScreenMargin);

std::vector<PointLightFrame> project(const SynthesizedGait& gait, ViewingAngle view, const ScreenMapping& mapping);

/// Uses a mapping fitted to `gait` itself.
std::vector<PointLightFrame> project(const SynthesizedGait& gait, ViewingAngle view);

struct TimedFrame {
    double time_s = 0.0;
    std::size_t source_index = 0;
    const PointLightFrame* frame = nullptr;
};

/// Endless frame stream at `fps`, picking the nearest source sample and
/// wrapping from the last frame back to the first.
class FrameStream {
public:
    FrameStream(std::vector<PointLightFrame> frames, double source_rate_hz, double fps);

    TimedFrame next();
    std::size_t emitted() const noexcept { return k_; }
    const std::vector<PointLightFrame>& frames() const noexcept { return frames_; }

private:
    std::vector<PointLightFrame> frames_;
    double ratio_;
    double fps_;
    std::size_t k_ = 0;
};

inline constexpr double kDefaultDisplayFps = 50.0;

FrameStream animate(std::vector<PointLightFrame> frames, double source_rate_hz, double fps = kDefaultDisplayFps);

void write_frames_jsonl(std::ostream& out, const std::vector<PointLightFrame>& frames);
void write_frames_csv(std::ostream& out, const std::vector<PointLightFrame>& frames);

}  // namespace scomo
