#pragma once

// Spatio-temporal gait parameters and their association with SCoMo.

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string_view>

#include "scomo/mocap.hpp"
#include "scomo/synthesis.hpp"

namespace scomo {

struct GaitParameterSet {
    double trunk_ml = 0.0;    // m, sternum medio-lateral range
    double trunk_lean = 0.0;  // deg, max forward trunk angle from vertical
    double robot_st = 0.0;    // s
    double ctl_st = 0.0;      // s
    double robot_sl = 0.0;    // m
    double ctl_sl = 0.0;      // m
    double st_si = 0.0;       // %
    double sl_si = 0.0;       // %
};

inline constexpr std::size_t kGaitParameterCount = 8;
inline constexpr std::array<std::string_view, kGaitParameterCount> kGaitParameterNames = {
    "trunk_ml", "trunk_lean", "robot_st", "ctl_st", "robot_sl", "ctl_sl", "st_si", "sl_si"};

std::array<double, kGaitParameterCount> as_array(const GaitParameterSet& p);

inline constexpr std::string_view kSymmetryIndexFormula = "100*(robot-ctl)/(0.5*(robot+ctl))";

/// Robinson symmetry index; positive when the robotic side is larger.
double symmetry_index(double robot, double ctl);

struct GaitParamsOptions {
    BodySide robotic_side = BodySide::right;
    // When set, step length is taken between the striking ankle and the
    // other ankle at its previous heel strike in belt-corrected coordinates.
    std::optional<double> belt_speed_mps;
};

GaitParameterSet compute_gait_params(const JointTrajectory& traj, const GaitEvents& events,
                                     const GaitParamsOptions& options = {});

/// Pearson r, or nullopt when either series is constant.
std::optional<double> pearson_r(std::span<const double> x, std::span<const double> y);

inline constexpr double kSalienceR2 = 0.5;

struct ParameterCorrelation {
    std::string_view parameter;
    std::optional<double> pearson_r;
    std::optional<double> r_squared;
    std::size_t n_points = 0;
    bool salient = false;
};

struct CorrelationReport {
    ViewingAngle view;
    std::array<ParameterCorrelation, kGaitParameterCount> parameters;
};

CorrelationReport correlate_with_scomo(std::span<const GaitParameterSet> params_by_session,
                                       std::span<const double> scomo_by_session, ViewingAngle view);

}  // namespace scomo
