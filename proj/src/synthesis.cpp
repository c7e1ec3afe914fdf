#include "scomo/synthesis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>

#include "json.hpp"
#include "scomo/error.hpp"
#include "scomo/kernels.hpp"

namespace scomo {

CoefficientOfMotion::CoefficientOfMotion(double alpha1) : alpha1_(alpha1) {
    if (!(alpha1 >= kMin && alpha1 <= kMax))
        throw Error(ErrorKind::invalid_argument, "coefficient of motion " + std::to_string(alpha1) +
                                                     " outside [-5, 5]");
}

std::string_view to_string(ViewKind kind) {
    switch (kind) {
        case ViewKind::frontal: return "frontal";
        case ViewKind::robotic_45: return "robotic_45";
        case ViewKind::contralateral_45: return "contralateral_45";
    }
    return "frontal";
}

ViewKind parse_view(std::string_view text) {
    for (ViewKind k : kAllViews)
        if (to_string(k) == text) return k;
    throw Error(ErrorKind::invalid_argument, "unknown view '" + std::string(text) + "'");
}

double ViewingAngle::yaw_deg() const noexcept {
    switch (kind) {
        case ViewKind::frontal: return 0.0;
        case ViewKind::robotic_45: return 45.0;
        case ViewKind::contralateral_45: return -45.0;
    }
    return 0.0;
}

GaitBlender::GaitBlender(const ParticipantModel& participant, const NormativeModel& normative)
    : p_(reconstruct_participant(participant)),
      n_(reconstruct_normative(normative, participant.t_length)),
      c_(participant.t_length, kChannelCount),
      rate_hz_(participant.rate_hz) {
    if (participant.mean_posture.size() != kChannelCount || normative.loadings.cols() != kChannelCount)
        throw Error(ErrorKind::invalid_argument, "blend: models must be 45-dimensional");
    for (std::size_t r = 0; r < c_.rows(); ++r)
        std::copy(participant.mean_posture.begin(), participant.mean_posture.end(), c_.row(r).begin());
}

SynthesizedGait GaitBlender::operator()(CoefficientOfMotion alpha1) const {
    SynthesizedGait g;
    g.alpha1 = alpha1.alpha1();
    g.rate_hz = rate_hz_;
    g.samples = Matrix(p_.rows(), p_.cols());
    kernels::active().blend(c_.data(), p_.data(), alpha1.participant_weight(), n_.data(),
                            alpha1.normative_weight(), g.samples.data(), p_.values().size());
    return g;
}

SynthesizedGait blend(const ParticipantModel& participant, const NormativeModel& normative,
                      CoefficientOfMotion alpha1) {
    return GaitBlender(participant, normative)(alpha1);
}

ProjectedPoint project_point(double x, double y, double z, double yaw_deg) {
    const double a = yaw_deg * std::numbers::pi / 180.0;
    const double c = std::cos(a);
    const double s = std::sin(a);
    return {c * x - s * y, z, s * x + c * y};
}

ScreenMapping fit_screen_mapping(const Matrix& samples, ViewingAngle view, double margin) {
    double umin = std::numeric_limits<double>::infinity(), umax = -umin;
    double vmin = umin, vmax = -umin;
    const double yaw = view.yaw_deg();
    for (std::size_t r = 0; r < samples.rows(); ++r)
        for (std::size_t j = 0; j < kJointCount; ++j) {
            const auto p = project_point(samples(r, 3 * j), samples(r, 3 * j + 1), samples(r, 3 * j + 2), yaw);
            umin = std::min(umin, p.u);
            umax = std::max(umax, p.u);
            vmin = std::min(vmin, p.v);
            vmax = std::max(vmax, p.v);
        }
    const double extent = std::max(umax - umin, vmax - vmin);
    if (!(extent > 1e-12)) throw Error(ErrorKind::invalid_data, "project: degenerate bounding box");
    return {0.5 * (umin + umax), 0.5 * (vmin + vmax), (1.0 - 2.0 * margin) / extent};
}

std::vector<PointLightFrame> project(const SynthesizedGait& gait, ViewingAngle view, const ScreenMapping& m) {
    const double yaw = view.yaw_deg();
    std::vector<PointLightFrame> frames(gait.samples.rows());
    for (std::size_t r = 0; r < frames.size(); ++r) {
        frames[r].frame_index = r;
        for (std::size_t j = 0; j < kJointCount; ++j) {
            const auto p = project_point(gait.samples(r, 3 * j), gait.samples(r, 3 * j + 1),
                                         gait.samples(r, 3 * j + 2), yaw);
            frames[r].points[j] = {0.5 + (p.u - m.center_u) * m.scale, 0.5 + (p.v - m.center_v) * m.scale};
        }
    }
    return frames;
}

std::vector<PointLightFrame> project(const SynthesizedGait& gait, ViewingAngle view) {
    return project(gait, view, fit_screen_mapping(gait.samples, view));
}

FrameStream::FrameStream(std::vector<PointLightFrame> frames, double source_rate_hz, double fps)
    : frames_(std::move(frames)), ratio_(source_rate_hz / fps), fps_(fps) {
    if (frames_.empty()) throw Error(ErrorKind::invalid_argument, "animate: empty frame sequence");
    if (!(fps > 0.0) || !(source_rate_hz > 0.0))
        throw Error(ErrorKind::invalid_argument, "animate: fps and source rate must be positive");
}

TimedFrame FrameStream::next() {
    const auto idx = static_cast<std::size_t>(std::llround(static_cast<double>(k_) * ratio_)) % frames_.size();
    TimedFrame f{static_cast<double>(k_) / fps_, idx, &frames_[idx]};
    ++k_;
    return f;
}

FrameStream animate(std::vector<PointLightFrame> frames, double source_rate_hz, double fps) {
    return FrameStream(std::move(frames), source_rate_hz, fps);
}

void write_frames_jsonl(std::ostream& out, const std::vector<PointLightFrame>& frames) {
    for (const auto& f : frames) {
        nlohmann::json j;
        j["frame_index"] = f.frame_index;
        auto& pts = j["points"] = nlohmann::json::array();
        for (const auto& p : f.points) pts.push_back({p[0], p[1]});
        out << j.dump() << '\n';
    }
}

void write_frames_csv(std::ostream& out, const std::vector<PointLightFrame>& frames) {
    out << "frame,joint,u,v\n";
    char buf[96];
    for (const auto& f : frames)
        for (std::size_t j = 0; j < kJointCount; ++j) {
            std::snprintf(buf, sizeof buf, "%zu,%s,%.6f,%.6f\n", f.frame_index, kJointNames[j].data(),
                          f.points[j][0], f.points[j][1]);
            out << buf;
        }
}

}  // namespace scomo
