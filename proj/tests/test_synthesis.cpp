#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include <nlohmann/json.hpp>

#include "fixtures.hpp"
#include "scomo/error.hpp"
#include "scomo/synthesis.hpp"

using namespace scomo;

namespace {

struct Fixture {
    ParticipantModel pm = fit_participant_model(test::periodic_walk(200, 50.0, 1, 0.001));
    NormativeModel nm = test::harmonic_normative(50.0, 2);
    Matrix c_broadcast() const {
        Matrix c(pm.t_length, kChannelCount);
        for (std::size_t r = 0; r < pm.t_length; ++r)
            for (std::size_t j = 0; j < kChannelCount; ++j) c(r, j) = pm.mean_posture[j];
        return c;
    }
};

Matrix add(const Matrix& a, const Matrix& b, double kb = 1.0) {
    Matrix out = a;
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) out(i, j) += kb * b(i, j);
    return out;
}

SynthesizedGait single_point_gait(double x, double y, double z, std::size_t frames = 2) {
    SynthesizedGait g;
    g.samples = Matrix(frames, kChannelCount);
    for (std::size_t r = 0; r < frames; ++r)
        for (std::size_t j = 0; j < kJointCount; ++j) {
            g.samples(r, 3 * j) = x;
            g.samples(r, 3 * j + 1) = y;
            g.samples(r, 3 * j + 2) = z;
        }
    return g;
}

}  // namespace

TEST_CASE("coefficient of motion range and clamp") {
    CHECK_THROWS_WITH_AS(CoefficientOfMotion(5.01), doctest::Contains("outside [-5, 5]"), Error);
    CHECK_THROWS_AS(CoefficientOfMotion(-5.01), Error);
    CHECK(CoefficientOfMotion(-2.0).alpha() == 0.0);
    CHECK(CoefficientOfMotion(3.0).alpha() == 3.0);
}

TEST_CASE_FIXTURE(Fixture, "blend endpoints") {
    const Matrix c = c_broadcast();
    const Matrix p = reconstruct_participant(pm);
    const Matrix n = reconstruct_normative(nm, pm.t_length);
    CHECK(max_abs_diff(blend(pm, nm, CoefficientOfMotion(0.0)).samples, add(c, p)) < 1e-9);
    CHECK(max_abs_diff(blend(pm, nm, CoefficientOfMotion(5.0)).samples, add(c, n)) < 1e-9);
    CHECK(max_abs_diff(blend(pm, nm, CoefficientOfMotion(-5.0)).samples, add(c, p, 2.0)) < 1e-9);
    CHECK(blend(pm, nm, CoefficientOfMotion(1.0)).samples.rows() == pm.t_length);
}

TEST_CASE_FIXTURE(Fixture, "blend is affine for non-negative alpha") {
    const GaitBlender b(pm, nm);
    for (auto [x, y] : {std::pair{0.0, 5.0}, {1.0, 2.0}, {0.3, 4.1}}) {
        const Matrix mid = b(CoefficientOfMotion(0.5 * (x + y))).samples;
        const Matrix avg = add(b(CoefficientOfMotion(x)).samples, b(CoefficientOfMotion(y)).samples);
        Matrix half = avg;
        for (std::size_t i = 0; i < half.rows(); ++i)
            for (std::size_t j = 0; j < half.cols(); ++j) half(i, j) *= 0.5;
        CHECK(max_abs_diff(mid, half) < 1e-9);
    }
}

TEST_CASE_FIXTURE(Fixture, "negative alpha ignores the normative term") {
    NormativeModel other = test::harmonic_normative(37.0, 99);
    for (double a : {-5.0, -2.5, -0.1}) {
        CHECK(max_abs_diff(blend(pm, nm, CoefficientOfMotion(a)).samples,
                           blend(pm, other, CoefficientOfMotion(a)).samples) == 0.0);
    }
}

TEST_CASE_FIXTURE(Fixture, "time mean of the blend stays at the mean posture") {
    const auto s = blend(pm, nm, CoefficientOfMotion(5.0)).samples;
    for (std::size_t j = 0; j < kChannelCount; ++j) {
        double m = 0.0;
        for (std::size_t r = 0; r < s.rows(); ++r) m += s(r, j);
        m /= static_cast<double>(s.rows());
        CHECK(std::abs(m - pm.mean_posture[j]) < 1e-6 * 0.2);
    }
}

TEST_CASE("yaw 0 maps the scene center to the screen center") {
    auto g = single_point_gait(0.0, 0.0, 0.0, 1);
    // Spread two joints symmetrically so the bounding box is centered on the origin.
    g.samples(0, 0) = -0.3;
    g.samples(0, 2) = -0.8;
    g.samples(0, 3) = 0.3;
    g.samples(0, 5) = 0.8;
    const auto frames = project(g, ViewingAngle{ViewKind::frontal});
    REQUIRE(frames.size() == 1);
    CHECK(frames[0].points[2][0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(frames[0].points[2][1] == doctest::Approx(0.5).epsilon(1e-12));
    for (const auto& p : frames[0].points) {
        CHECK(p[0] >= 0.0);
        CHECK(p[0] <= 1.0);
        CHECK(p[1] >= 0.0);
        CHECK(p[1] <= 1.0);
    }
}

TEST_CASE("rotating by 90 degrees follows the hand-computed rotation matrix") {
    const double c = std::cos(std::numbers::pi / 2.0), s = std::sin(std::numbers::pi / 2.0);
    const auto p = project_point(1.0, 0.0, 0.0, 90.0);
    CHECK(p.u == doctest::Approx(c * 1.0 - s * 0.0).scale(1.0).epsilon(1e-15));
    CHECK(p.depth == doctest::Approx(s * 1.0 + c * 0.0).epsilon(1e-15));
    CHECK(p.v == 0.0);
    const auto q = project_point(0.2, 0.5, 1.1, 360.0);
    CHECK(q.u == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(q.v == doctest::Approx(1.1));
}

TEST_CASE_FIXTURE(Fixture, "opposite yaws of a mirrored scene are mirror images") {
    const auto gait = blend(pm, nm, CoefficientOfMotion(1.0));
    SynthesizedGait mirrored = gait;
    for (std::size_t r = 0; r < mirrored.samples.rows(); ++r)
        for (std::size_t j = 0; j < kJointCount; ++j) mirrored.samples(r, 3 * j) *= -1.0;
    const auto a = project(gait, ViewingAngle{ViewKind::robotic_45});
    const auto b = project(mirrored, ViewingAngle{ViewKind::contralateral_45});
    REQUIRE(a.size() == b.size());
    for (std::size_t f = 0; f < a.size(); ++f)
        for (std::size_t j = 0; j < kJointCount; ++j) {
            REQUIRE(std::abs(a[f].points[j][0] - (1.0 - b[f].points[j][0])) < 1e-9);
            REQUIRE(std::abs(a[f].points[j][1] - b[f].points[j][1]) < 1e-9);
        }
}

TEST_CASE("view yaws match their kinds") {
    CHECK(ViewingAngle{ViewKind::frontal}.yaw_deg() == 0.0);
    CHECK(ViewingAngle{ViewKind::robotic_45}.yaw_deg() == 45.0);
    CHECK(ViewingAngle{ViewKind::contralateral_45}.yaw_deg() == -45.0);
    for (ViewKind k : kAllViews) CHECK(parse_view(to_string(k)) == k);
}

TEST_CASE("coincident points have a degenerate bounding box") {
    CHECK_THROWS_WITH_AS(project(single_point_gait(0.1, 0.2, 0.3), ViewingAngle{}), doctest::Contains("degenerate"), Error);
}

TEST_CASE_FIXTURE(Fixture, "a fixed mapping keeps the walker from rescaling") {
    const GaitBlender b(pm, nm);
    const auto view = ViewingAngle{ViewKind::frontal};
    const auto mapping = fit_screen_mapping(b(CoefficientOfMotion(0.0)).samples, view);
    const auto f0 = project(b(CoefficientOfMotion(0.0)), view, mapping);
    const auto f0_self = project(b(CoefficientOfMotion(0.0)), view);
    CHECK(f0[3].points[4] == f0_self[3].points[4]);
    // Same mapping object reused for a different alpha: mean posture lands at the same place.
    const auto m2 = fit_screen_mapping(b(CoefficientOfMotion(0.0)).samples, view);
    CHECK(m2.scale == mapping.scale);
    CHECK(m2.center_u == mapping.center_u);
}

TEST_CASE("animation resamples by nearest source sample and loops") {
    std::vector<PointLightFrame> frames(100);
    for (std::size_t i = 0; i < frames.size(); ++i) frames[i].frame_index = i;

    auto same = animate(frames, 100.0, 100.0);
    for (std::size_t k = 0; k < 100; ++k) CHECK(same.next().source_index == k);
    CHECK(same.next().source_index == 0);

    auto half = animate(frames, 100.0, 50.0);
    for (std::size_t k = 0; k < 50; ++k) CHECK(half.next().source_index == 2 * k);
    CHECK(half.next().source_index == 0);

    auto sixty = animate(frames, 100.0, 60.0);
    for (std::size_t k = 0; k < 10; ++k) {
        const auto f = sixty.next();
        CHECK(f.source_index == static_cast<std::size_t>(std::llround(k * 100.0 / 60.0)));
        CHECK(f.time_s == doctest::Approx(k / 60.0));
        CHECK(f.frame->frame_index == f.source_index);
    }
    CHECK_THROWS_AS(animate({}, 100.0, 50.0), Error);
    CHECK_THROWS_AS(animate(frames, 100.0, 0.0), Error);
}

TEST_CASE_FIXTURE(Fixture, "frame exports") {
    const auto frames = project(blend(pm, nm, CoefficientOfMotion(0.0)), ViewingAngle{});
    std::ostringstream jl, csv;
    write_frames_jsonl(jl, frames);
    write_frames_csv(csv, frames);
    std::istringstream lines(jl.str());
    std::string line;
    std::size_t count = 0;
    while (std::getline(lines, line)) {
        const auto j = nlohmann::json::parse(line);
        CHECK(j.at("points").size() == kJointCount);
        ++count;
    }
    CHECK(count == frames.size());
    std::istringstream rows(csv.str());
    std::size_t csv_lines = 0;
    while (std::getline(rows, line)) ++csv_lines;
    CHECK(csv_lines == 1 + frames.size() * kJointCount);
}
