#pragma once

// Parameterized synthetic walker: joint-center trajectory plus bilateral
// vertical GRF with known step timing, step lengths, trunk lean and sway.

#include <cstddef>
#include <cstdint>
#include <vector>

#include "scomo/mocap.hpp"

namespace scomo {

/// Timing is in integer milliseconds so heel strikes land on exact samples
/// of both the 1000 Hz force plate and the 100 Hz kinematics.
struct WalkerParams {
    int stride_ms = 1200;
    int robot_step_ms = 600;  // contralateral heel strike to robotic heel strike
    int stance_ms = 720;
    double robot_step_m = 0.5;
    double ctl_step_m = 0.5;
    double trunk_lean_deg = 5.0;  // mean forward lean
    double lean_swing_deg = 1.0;  // twice-per-stride oscillation about the mean
    double trunk_sway_m = 0.03;   // sternum medio-lateral amplitude
    double noise_m = 0.0;         // white noise on every channel
    double body_weight_n = 700.0;
    double grf_noise_n = 0.0;
    double grf_offset_n = 0.0;  // unloaded plate reading
    BodySide robotic_side = BodySide::right;
    std::size_t n_cycles = 8;  // trial lasts n_cycles + 3.5 strides
    std::uint64_t seed = 1;
};

inline constexpr double kSyntheticKinematicsHz = 100.0;
inline constexpr double kSyntheticGrfHz = 1000.0;

struct SyntheticTrial {
    JointTrajectory trajectory;  // cycle_starts = robotic heel strikes
    ForcePlateRecord grf_robotic;
    ForcePlateRecord grf_contralateral;
    std::vector<int> robot_strikes_ms;
    std::vector<int> ctl_strikes_ms;
};

/// Throws on inconsistent timing (step or stance not inside the stride).
SyntheticTrial generate_walker(const WalkerParams& params);

}  // namespace scomo
