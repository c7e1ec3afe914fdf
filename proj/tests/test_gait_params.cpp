#include <doctest.h>

#include <cmath>
#include <random>

#include "scomo/error.hpp"
#include "scomo/gait_params.hpp"
#include "support.hpp"

using namespace scomo;

namespace {

// Upright trunk, ankles positioned so that at every right (robotic) heel
// strike the right ankle leads by `robot_sl` and at every left strike the left
// ankle leads by `ctl_sl`. Robotic strikes every 100 samples from `first`,
// contralateral strikes `ctl_delay` samples after each robotic one.
struct Constructed {
    JointTrajectory traj;
    GaitEvents events;
};

Constructed constructed_gait(double robot_sl, double ctl_sl, std::size_t ctl_delay, std::size_t first = 20) {
    Constructed g;
    g.traj = test::constant_trajectory(first + 700);
    for (std::size_t r = 0; r < g.traj.length(); ++r) {
        g.traj.samples(r, channel(Joint::pelvis, Axis::z)) = 1.0;
        g.traj.samples(r, channel(Joint::sternum, Axis::z)) = 1.45;
        g.traj.samples(r, channel(Joint::sternum, Axis::x)) = 0.01 * std::sin(0.05 * r);
    }
    for (std::size_t k = 0; k < 6; ++k) {
        const std::size_t hs_r = first + 100 * k;
        const std::size_t hs_l = hs_r + ctl_delay;
        g.events.robotic.heel_strikes.push_back(hs_r);
        g.events.contralateral.heel_strikes.push_back(hs_l);
        g.traj.samples(hs_r, channel(Joint::right_ankle, Axis::y)) = 0.5 * robot_sl;
        g.traj.samples(hs_r, channel(Joint::left_ankle, Axis::y)) = -0.5 * robot_sl;
        g.traj.samples(hs_l, channel(Joint::left_ankle, Axis::y)) = 0.5 * ctl_sl;
        g.traj.samples(hs_l, channel(Joint::right_ankle, Axis::y)) = -0.5 * ctl_sl;
    }
    return g;
}

long double textbook_r(const std::vector<double>& x, const std::vector<double>& y) {
    const long double n = x.size();
    long double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += static_cast<long double>(x[i]) * x[i];
        syy += static_cast<long double>(y[i]) * y[i];
        sxy += static_cast<long double>(x[i]) * y[i];
    }
    return (n * sxy - sx * sy) / std::sqrt((n * sxx - sx * sx) * (n * syy - sy * sy));
}

}  // namespace

TEST_CASE("symmetric constructed gait has zero symmetry indices") {
    const auto g = constructed_gait(0.4, 0.4, 50);
    const auto p = compute_gait_params(g.traj, g.events);
    CHECK(std::abs(p.st_si) < 1e-12);
    CHECK(std::abs(p.sl_si) < 1e-12);
    CHECK(p.robot_st == doctest::Approx(0.5));
    CHECK(p.robot_sl == doctest::Approx(0.4));
}

TEST_CASE("robot step 0.30 m and ctl step 0.50 m give SL SI of -50%") {
    const auto g = constructed_gait(0.30, 0.50, 60);
    const auto p = compute_gait_params(g.traj, g.events);
    CHECK(p.robot_sl == doctest::Approx(0.30).epsilon(1e-12));
    CHECK(p.ctl_sl == doctest::Approx(0.50).epsilon(1e-12));
    CHECK(p.sl_si == doctest::Approx(100.0 * (0.30 - 0.50) / 0.40).epsilon(1e-12));
    // Robotic step from contralateral strike (k-1)*100+60 to robotic strike k*100: 40 samples.
    CHECK(p.robot_st == doctest::Approx(0.40).epsilon(1e-12));
    CHECK(p.ctl_st == doctest::Approx(0.60).epsilon(1e-12));
    CHECK(p.st_si == doctest::Approx(100.0 * (0.4 - 0.6) / 0.5).epsilon(1e-12));
}

TEST_CASE("vertical trunk has zero lean; tilted trunk reports its angle") {
    auto g = constructed_gait(0.4, 0.4, 50);
    CHECK(compute_gait_params(g.traj, g.events).trunk_lean == 0.0);
    // Forward tilt of 10 degrees at one sample.
    g.traj.samples(300, channel(Joint::sternum, Axis::y)) = 0.45 * std::tan(10.0 * M_PI / 180.0);
    CHECK(compute_gait_params(g.traj, g.events).trunk_lean == doctest::Approx(10.0).epsilon(1e-12));
    // Backward tilt does not count as lean.
    g.traj.samples(300, channel(Joint::sternum, Axis::y)) = -0.2;
    const double lean = compute_gait_params(g.traj, g.events).trunk_lean;
    CHECK(lean >= 0.0);
    CHECK(lean < 90.0);
}

TEST_CASE("trunk ML is the sternum medio-lateral range") {
    const auto g = constructed_gait(0.4, 0.4, 50);
    double lo = 1e9, hi = -1e9;
    for (std::size_t r = 0; r < g.traj.length(); ++r) {
        lo = std::min(lo, g.traj.at(r, Joint::sternum, Axis::x));
        hi = std::max(hi, g.traj.at(r, Joint::sternum, Axis::x));
    }
    CHECK(compute_gait_params(g.traj, g.events).trunk_ml == doctest::Approx(hi - lo));
}

TEST_CASE("shifting all events and samples leaves parameters unchanged") {
    const auto a = compute_gait_params(constructed_gait(0.3, 0.5, 60, 20).traj, constructed_gait(0.3, 0.5, 60, 20).events);
    const auto shifted = constructed_gait(0.3, 0.5, 60, 57);
    const auto b = compute_gait_params(shifted.traj, shifted.events);
    CHECK(a.robot_st == doctest::Approx(b.robot_st).epsilon(1e-12));
    CHECK(a.ctl_st == doctest::Approx(b.ctl_st).epsilon(1e-12));
    CHECK(a.robot_sl == doctest::Approx(b.robot_sl).epsilon(1e-12));
    CHECK(a.sl_si == doctest::Approx(b.sl_si).epsilon(1e-12));
}

TEST_CASE("left-side robotic leg swaps the ankles") {
    auto g = constructed_gait(0.3, 0.5, 60);
    GaitParamsOptions opts;
    opts.robotic_side = BodySide::left;
    // With left as robotic, the robotic strikes see the left ankle trailing.
    std::swap(g.events.robotic, g.events.contralateral);
    const auto p = compute_gait_params(g.traj, g.events, opts);
    CHECK(p.robot_sl == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(p.ctl_sl == doctest::Approx(0.3).epsilon(1e-12));
}

TEST_CASE("belt-speed correction adds belt travel between strikes") {
    const auto g = constructed_gait(0.3, 0.3, 50);
    GaitParamsOptions opts;
    opts.belt_speed_mps = 0.5;
    const auto p = compute_gait_params(g.traj, g.events, opts);
    // Striking ankle at +0.15, other ankle at its own strike 50 samples earlier
    // was at +0.15; the belt moves 0.5 m/s * 0.5 s = 0.25 m in between.
    CHECK(p.robot_sl == doctest::Approx(0.15 - 0.15 + 0.25).epsilon(1e-12));
}

TEST_CASE("missing side events are errors") {
    auto g = constructed_gait(0.3, 0.5, 60);
    g.events.contralateral.heel_strikes.resize(1);
    CHECK_THROWS_WITH_AS(compute_gait_params(g.traj, g.events), doctest::Contains("missing side events"), Error);
}

TEST_CASE("symmetry index formula, antisymmetry and zero denominator") {
    CHECK(symmetry_index(0.3, 0.5) == doctest::Approx(-50.0));
    for (auto [a, b] : {std::pair{0.3, 0.5}, {1.2, 0.9}, {2.0, 1e-3}}) {
        CHECK(symmetry_index(a, b) == -symmetry_index(b, a));
        CHECK(std::abs(symmetry_index(a, b)) <= 200.0);
    }
    CHECK_THROWS_WITH_AS(symmetry_index(0.0, 0.0), doctest::Contains("zero denominator"), Error);
}

namespace {

std::vector<GaitParameterSet> params_from(const std::vector<double>& x) {
    std::vector<GaitParameterSet> out;
    for (double v : x) {
        GaitParameterSet p;
        p.trunk_ml = v;
        p.trunk_lean = 3.0 * v * v;
        p.robot_st = 0.5;
        p.ctl_st = 0.6 - 0.01 * v;
        p.robot_sl = -v;
        p.ctl_sl = 0.4;
        p.st_si = v;
        p.sl_si = 2.0;
        out.push_back(p);
    }
    return out;
}

}  // namespace

TEST_CASE("perfect linear relation is salient with r = 1") {
    const std::vector<double> x = {0.1, 0.4, 0.2, 0.9, 0.5};
    std::vector<double> y;
    for (double v : x) y.push_back(2.0 * v + 1.0);
    const auto rep = correlate_with_scomo(params_from(x), y, ViewingAngle{});
    const auto& ml = rep.parameters[0];
    CHECK(ml.parameter == "trunk_ml");
    REQUIRE(ml.pearson_r);
    CHECK(*ml.pearson_r == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(*ml.r_squared == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(ml.salient);
    CHECK(*rep.parameters[4].pearson_r == doctest::Approx(-1.0).epsilon(1e-12));
    // Constant columns are undefined, never salient.
    CHECK_FALSE(rep.parameters[2].pearson_r.has_value());
    CHECK_FALSE(rep.parameters[2].salient);
    for (const auto& c : rep.parameters) {
        if (c.pearson_r) CHECK(std::abs(*c.r_squared - *c.pearson_r * *c.pearson_r) <= 1e-12);
        CHECK(c.salient == (c.r_squared && *c.r_squared > 0.5));
    }
}

TEST_CASE("constant SCoMo leaves every r undefined") {
    const std::vector<double> x = {0.1, 0.4, 0.2, 0.9};
    const std::vector<double> y(4, 0.7);
    const auto rep = correlate_with_scomo(params_from(x), y, ViewingAngle{ViewKind::robotic_45});
    for (const auto& c : rep.parameters) {
        CHECK_FALSE(c.pearson_r.has_value());
        CHECK_FALSE(c.salient);
    }
}

TEST_CASE("12-point Pearson r matches the textbook formula") {
    std::mt19937_64 rng(21);
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<double> x(12), y(12);
    for (std::size_t i = 0; i < 12; ++i) {
        x[i] = g(rng);
        y[i] = 0.6 * x[i] + 0.8 * g(rng);
    }
    const auto r = pearson_r(x, y);
    REQUIRE(r);
    CHECK(std::abs(*r - static_cast<double>(textbook_r(x, y))) < 1e-12);

    std::vector<double> xa(x), yn(y);
    for (double& v : xa) v = 4.0 * v + 7.0;
    for (double& v : yn) v = -v;
    CHECK(std::abs(*pearson_r(xa, y) - *r) < 1e-12);
    CHECK(std::abs(*pearson_r(x, yn) + *r) < 1e-12);
}

TEST_CASE("repeated identical values give an undefined r") {
    // 12 copies of 0.060115012 do not average back to exactly that value.
    const std::vector<double> x(12, 0.060115012);
    std::vector<double> y(12);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = static_cast<double>(i);
    CHECK_FALSE(pearson_r(x, y).has_value());
    CHECK_FALSE(pearson_r(y, x).has_value());
}

TEST_CASE("correlation preconditions") {
    const std::vector<double> x = {0.1, 0.4, 0.2};
    CHECK_THROWS_WITH_AS(correlate_with_scomo(params_from(x), std::vector<double>{1, 2}, ViewingAngle{}),
                         doctest::Contains("length mismatch"), Error);
    CHECK_THROWS_AS(correlate_with_scomo(params_from({0.1, 0.2}), std::vector<double>{1, 2}, ViewingAngle{}), Error);
}
