#include "scomo/gait_params.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "scomo/error.hpp"

namespace scomo {

std::array<double, kGaitParameterCount> as_array(const GaitParameterSet& p) {
    return {p.trunk_ml, p.trunk_lean, p.robot_st, p.ctl_st, p.robot_sl, p.ctl_sl, p.st_si, p.sl_si};
}

double symmetry_index(double robot, double ctl) {
    const double denom = 0.5 * (robot + ctl);
    if (denom == 0.0) throw Error(ErrorKind::invalid_data, "symmetry index: zero denominator");
    return 100.0 * (robot - ctl) / denom;
}

namespace {

struct StepStats {
    double time_s = 0.0;
    double length_m = 0.0;
};

// Steps ending at `side` heel strikes, each paired with the latest preceding
// heel strike of the other side.
StepStats side_steps(const JointTrajectory& traj, const GaitEvents& events, Side side,
                     const GaitParamsOptions& options) {
    const Side other = side == Side::robotic ? Side::contralateral : Side::robotic;
    const auto& own = events.side(side).heel_strikes;
    const auto& opp = events.side(other).heel_strikes;
    const Joint own_ankle = ankle_of(side, options.robotic_side);
    const Joint opp_ankle = ankle_of(other, options.robotic_side);
    const std::size_t ap = channel(own_ankle, Axis::y);
    const std::size_t ap_other = channel(opp_ankle, Axis::y);

    double time_sum = 0.0, length_sum = 0.0;
    std::size_t count = 0;
    for (std::size_t hs : own) {
        if (hs >= traj.length()) continue;
        const auto it = std::lower_bound(opp.begin(), opp.end(), hs);
        if (it == opp.begin()) continue;
        const std::size_t prev = *(it - 1);
        time_sum += static_cast<double>(hs - prev) / traj.rate_hz;
        if (options.belt_speed_mps) {
            const double v = *options.belt_speed_mps;
            const double striking = traj.samples(hs, ap) + v * static_cast<double>(hs) / traj.rate_hz;
            const double planted = traj.samples(prev, ap_other) + v * static_cast<double>(prev) / traj.rate_hz;
            length_sum += striking - planted;
        } else {
            length_sum += traj.samples(hs, ap) - traj.samples(hs, ap_other);
        }
        ++count;
    }
    if (count == 0)
        throw Error(ErrorKind::invalid_data, "gait params: missing side events (no " + std::string(to_string(side)) +
                                                 " step with a preceding " + std::string(to_string(other)) +
                                                 " heel strike)");
    return {time_sum / static_cast<double>(count), length_sum / static_cast<double>(count)};
}

}  // namespace

GaitParameterSet compute_gait_params(const JointTrajectory& traj, const GaitEvents& events,
                                     const GaitParamsOptions& options) {
    if (traj.samples.cols() != kChannelCount || traj.length() == 0)
        throw Error(ErrorKind::invalid_argument, "gait params: invalid trajectory");
    for (Side s : {Side::robotic, Side::contralateral})
        if (events.side(s).heel_strikes.size() < 2)
            throw Error(ErrorKind::invalid_data, "gait params: missing side events (fewer than 2 " +
                                                     std::string(to_string(s)) + " heel strikes)");

    GaitParameterSet p;
    const auto robot = side_steps(traj, events, Side::robotic, options);
    const auto ctl = side_steps(traj, events, Side::contralateral, options);
    p.robot_st = robot.time_s;
    p.ctl_st = ctl.time_s;
    p.robot_sl = robot.length_m;
    p.ctl_sl = ctl.length_m;
    p.st_si = symmetry_index(p.robot_st, p.ctl_st);
    p.sl_si = symmetry_index(p.robot_sl, p.ctl_sl);

    double ml_min = traj.at(0, Joint::sternum, Axis::x), ml_max = ml_min;
    double lean = 0.0;
    for (std::size_t t = 0; t < traj.length(); ++t) {
        const double x = traj.at(t, Joint::sternum, Axis::x);
        ml_min = std::min(ml_min, x);
        ml_max = std::max(ml_max, x);
        const double dy = traj.at(t, Joint::sternum, Axis::y) - traj.at(t, Joint::pelvis, Axis::y);
        const double dz = traj.at(t, Joint::sternum, Axis::z) - traj.at(t, Joint::pelvis, Axis::z);
        lean = std::max(lean, std::atan2(dy, dz) * 180.0 / std::numbers::pi);
    }
    p.trunk_ml = ml_max - ml_min;
    p.trunk_lean = lean;
    return p;
}

std::optional<double> pearson_r(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw Error(ErrorKind::invalid_argument, "pearson: length mismatch");
    // A constant series has no correlation; rounding in the mean would
    // otherwise leave a tiny nonzero spread.
    auto constant = [](std::span<const double> v) {
        return v.empty() || std::all_of(v.begin(), v.end(), [&](double a) { return a == v[0]; });
    };
    if (constant(x) || constant(y)) return std::nullopt;
    const auto n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) return std::nullopt;
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

CorrelationReport correlate_with_scomo(std::span<const GaitParameterSet> params, std::span<const double> scomo,
                                       ViewingAngle view) {
    if (params.size() != scomo.size())
        throw Error(ErrorKind::invalid_argument, "correlate: length mismatch (" + std::to_string(params.size()) +
                                                     " parameter sets vs " + std::to_string(scomo.size()) +
                                                     " SCoMo values)");
    if (params.size() < 3) throw Error(ErrorKind::invalid_argument, "correlate: need at least 3 sessions");

    CorrelationReport report{view, {}};
    std::vector<double> column(params.size());
    for (std::size_t k = 0; k < kGaitParameterCount; ++k) {
        for (std::size_t i = 0; i < params.size(); ++i) column[i] = as_array(params[i])[k];
        auto& c = report.parameters[k];
        c.parameter = kGaitParameterNames[k];
        c.n_points = params.size();
        c.pearson_r = pearson_r(column, scomo);
        if (c.pearson_r) {
            c.r_squared = *c.pearson_r * *c.pearson_r;
            c.salient = *c.r_squared > kSalienceR2;
        }
    }
    return report;
}

}  // namespace scomo
