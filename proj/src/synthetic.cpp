#include "scomo/synthetic.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "scomo/error.hpp"

namespace scomo {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Paired joints alternate left/right from the ankles up to the shoulders.
Joint paired(Joint left, bool right) {
    return static_cast<Joint>(static_cast<std::size_t>(left) + (right ? 1 : 0));
}

int positive_mod(int a, int m) { return ((a % m) + m) % m; }

struct Limb {
    bool right = false;
    int strike_ms = 0;  // any heel strike of this side
    double offset_m = 0.0;
};

}  // namespace

SyntheticTrial generate_walker(const WalkerParams& p) {
    if (p.stride_ms <= 0 || p.robot_step_ms <= 0 || p.robot_step_ms >= p.stride_ms)
        throw Error(ErrorKind::invalid_argument, "synthetic walker: step must lie inside the stride");
    if (p.stance_ms <= 0 || p.stance_ms >= p.stride_ms)
        throw Error(ErrorKind::invalid_argument, "synthetic walker: stance must lie inside the stride");
    if (p.n_cycles < 1) throw Error(ErrorKind::invalid_argument, "synthetic walker: need at least one cycle");

    const int stride = p.stride_ms;
    const int duration_ms = static_cast<int>(p.n_cycles) * stride + (7 * stride) / 2;
    const int sample_ms = static_cast<int>(1000.0 / kSyntheticKinematicsHz);
    const std::size_t frames = static_cast<std::size_t>(duration_ms / sample_ms);
    const int first_robot = (stride / 4) / sample_ms * sample_ms;

    // Ankle AP: offset + a cos(phase). The heel strike is the forward peak,
    // so each step length is fixed by a, the offsets and the step timing.
    const double gap = std::cos(kTwoPi * p.robot_step_ms / stride);
    const double a = (p.robot_step_m + p.ctl_step_m) / (2.0 * (1.0 - gap));
    const double half_diff = 0.25 * (p.robot_step_m - p.ctl_step_m);
    const bool robot_right = p.robotic_side == BodySide::right;
    const Limb robot{robot_right, first_robot, half_diff};
    const Limb ctl{!robot_right, first_robot - p.robot_step_ms, -half_diff};

    SyntheticTrial out;
    out.trajectory.rate_hz = kSyntheticKinematicsHz;
    out.trajectory.samples = Matrix(frames, kChannelCount);
    Matrix& s = out.trajectory.samples;
    auto set = [&](std::size_t t, Joint j, double x, double y, double z) {
        s(t, channel(j, Axis::x)) = x;
        s(t, channel(j, Axis::y)) = y;
        s(t, channel(j, Axis::z)) = z;
    };

    const double lean0 = p.trunk_lean_deg * std::numbers::pi / 180.0;
    const double lean_swing = p.lean_swing_deg * std::numbers::pi / 180.0;
    constexpr double kTrunk = 0.45, kNeck = 0.25, kShoulderDrop = 0.05;

    for (std::size_t t = 0; t < frames; ++t) {
        const int ms = static_cast<int>(t) * sample_ms;
        const double body = kTwoPi * positive_mod(ms - robot.strike_ms, stride) / stride;
        const double bounce = 0.02 * std::cos(2.0 * body);
        const double pelvis_x = 0.4 * p.trunk_sway_m * std::sin(body);
        const double pelvis_z = 0.95 + bounce;
        set(t, Joint::pelvis, pelvis_x, 0.0, pelvis_z);

        const double lean = lean0 + lean_swing * std::sin(2.0 * body);
        const double sternum_x = p.trunk_sway_m * std::sin(body);
        const double sternum_y = kTrunk * std::sin(lean);
        const double sternum_z = pelvis_z + kTrunk * std::cos(lean);
        set(t, Joint::sternum, sternum_x, sternum_y, sternum_z);
        set(t, Joint::head, sternum_x, sternum_y + kNeck * std::sin(lean), sternum_z + kNeck * std::cos(lean));

        for (const Limb& limb : {robot, ctl}) {
            const double phase = kTwoPi * positive_mod(ms - limb.strike_ms, stride) / stride;
            const double sx = limb.right ? 1.0 : -1.0;
            const double swing = a * std::cos(phase);
            const double ankle_y = limb.offset_m + swing;
            const double lift = 0.04 * (1.0 - std::cos(phase - 0.6));
            set(t, paired(Joint::left_ankle, limb.right), 0.1 * sx, ankle_y, 0.08 + lift);
            set(t, paired(Joint::left_knee, limb.right), 0.1 * sx, 0.5 * ankle_y + 0.04, 0.5 + 0.5 * lift);
            set(t, paired(Joint::left_hip, limb.right), 0.1 * sx + pelvis_x, 0.15 * ankle_y, pelvis_z);
            // Arms swing against the leg on the same side.
            const double shoulder_y = sternum_y;
            const double shoulder_z = sternum_z - kShoulderDrop;
            set(t, paired(Joint::left_shoulder, limb.right), 0.18 * sx + sternum_x, shoulder_y, shoulder_z);
            set(t, paired(Joint::left_elbow, limb.right), 0.2 * sx + sternum_x, shoulder_y - 0.15 * swing,
                shoulder_z - 0.28);
            set(t, paired(Joint::left_wrist, limb.right), 0.21 * sx + sternum_x, shoulder_y - 0.35 * swing,
                shoulder_z - 0.52);
        }
    }

    std::mt19937_64 rng(p.seed);
    if (p.noise_m > 0.0) {
        std::normal_distribution<double> noise(0.0, p.noise_m);
        for (double& v : std::span(s.data(), s.rows() * s.cols())) v += noise(rng);
    }

    for (int ms = robot.strike_ms; ms < duration_ms; ms += stride) {
        out.robot_strikes_ms.push_back(ms);
        out.trajectory.cycle_starts.push_back(static_cast<std::size_t>(ms / sample_ms));
    }
    for (int ms = positive_mod(ctl.strike_ms, stride); ms < duration_ms; ms += stride) out.ctl_strikes_ms.push_back(ms);

    std::normal_distribution<double> grf_noise(0.0, p.grf_noise_n > 0.0 ? p.grf_noise_n : 1.0);
    auto plate = [&](const Limb& limb, Side side) {
        ForcePlateRecord grf;
        grf.rate_hz = kSyntheticGrfHz;
        grf.side = side;
        grf.vertical_grf.resize(static_cast<std::size_t>(duration_ms));
        for (int ms = 0; ms < duration_ms; ++ms) {
            const int phi = positive_mod(ms - limb.strike_ms, stride);
            double f = p.grf_offset_n;
            if (phi < p.stance_ms)
                f += p.body_weight_n * (0.9 + 0.2 * std::sin(std::numbers::pi * phi / p.stance_ms));
            if (p.grf_noise_n > 0.0) f += grf_noise(rng);
            grf.vertical_grf[static_cast<std::size_t>(ms)] = f;
        }
        return grf;
    };
    out.grf_robotic = plate(robot, Side::robotic);
    out.grf_contralateral = plate(ctl, Side::contralateral);
    return out;
}

}  // namespace scomo
