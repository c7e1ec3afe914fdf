#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "scomo/error.hpp"
#include "scomo/gait_model.hpp"
#include "scomo/similarity.hpp"
#include "support.hpp"

using namespace scomo;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Rows orthonormal in R^45, from Eigen's QR of a random matrix.
Matrix random_orthonormal_rows(std::size_t k, std::mt19937_64& rng) {
    const Matrix g = test::random_matrix(kChannelCount, k, rng);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(test::to_eigen(g));
    const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(kChannelCount, k);
    Matrix out(k, kChannelCount);
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < kChannelCount; ++j) out(i, j) = q(j, i);
    return out;
}

JointTrajectory trajectory_from(const Matrix& samples) {
    JointTrajectory traj;
    traj.samples = samples;
    return traj;
}

// Data confined to a 2-D affine plane with a nonzero offset.
Matrix planar_data(std::size_t t, std::mt19937_64& rng) {
    const Matrix basis = random_orthonormal_rows(2, rng);
    std::normal_distribution<double> g(0.0, 1.0);
    Matrix x(t, kChannelCount);
    for (std::size_t r = 0; r < t; ++r) {
        const double a = 3.0 * g(rng), b = g(rng);
        for (std::size_t c = 0; c < kChannelCount; ++c) x(r, c) = 0.7 + 0.01 * c + a * basis(0, c) + b * basis(1, c);
    }
    return x;
}

Matrix centered(const Matrix& x) {
    Matrix out = x;
    for (std::size_t c = 0; c < x.cols(); ++c) {
        double m = 0.0;
        for (std::size_t r = 0; r < x.rows(); ++r) m += x(r, c);
        m /= static_cast<double>(x.rows());
        for (std::size_t r = 0; r < x.rows(); ++r) out(r, c) -= m;
    }
    return out;
}

Matrix add_mean(const Matrix& p, const std::vector<double>& c) {
    Matrix out = p;
    for (std::size_t r = 0; r < p.rows(); ++r)
        for (std::size_t j = 0; j < p.cols(); ++j) out(r, j) += c[j];
    return out;
}

}  // namespace

TEST_CASE("data in a 2-D plane keeps two components and reconstructs exactly") {
    std::mt19937_64 rng(5);
    const Matrix x = planar_data(300, rng);
    const auto model = fit_participant_model(trajectory_from(x));
    CHECK(model.n_components == 2);
    CHECK(max_abs_diff(add_mean(reconstruct_participant(model), model.mean_posture), x) < 1e-9);
}

TEST_CASE("isotropic noise needs about 43 components, matching an eigen oracle") {
    std::mt19937_64 rng(6);
    const Matrix x = test::random_matrix(4000, kChannelCount, rng);
    const auto model = fit_participant_model(trajectory_from(x));
    CHECK(model.n_components >= 42);
    CHECK(model.n_components <= 44);

    const Eigen::MatrixXd xc = test::to_eigen(centered(x));
    const Eigen::MatrixXd cov = xc.transpose() * xc / 3999.0;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    std::vector<double> ev(es.eigenvalues().data(), es.eigenvalues().data() + kChannelCount);
    std::sort(ev.rbegin(), ev.rend());
    double total = 0.0;
    for (double v : ev) total += v;
    std::size_t n = 0;
    double cum = 0.0;
    while (cum < 0.95 * total) cum += ev[n++];
    CHECK(model.n_components == n);
    for (std::size_t i = 0; i < kChannelCount; ++i)
        CHECK(model.explained_variance_ratio[i] == doctest::Approx(ev[i] / total).epsilon(1e-9));
}

TEST_CASE("full-rank reconstruction plus mean reproduces the input") {
    std::mt19937_64 rng(7);
    const Matrix x = test::random_matrix(200, kChannelCount, rng, 0.05);
    ParticipantModelOptions opts;
    opts.components = kChannelCount;
    const auto model = fit_participant_model(trajectory_from(x), opts);
    CHECK(max_abs_diff(reconstruct_participant(model), centered(x)) < 1e-9);
    CHECK(max_abs_diff(add_mean(reconstruct_participant(model), model.mean_posture), x) < 1e-9);
}

TEST_CASE("zero retained components reconstruct to zero") {
    std::mt19937_64 rng(8);
    ParticipantModelOptions opts;
    opts.components = 0;
    const auto model = fit_participant_model(trajectory_from(test::random_matrix(60, kChannelCount, rng)), opts);
    CHECK(max_abs(reconstruct_participant(model)) == 0.0);
    CHECK(reconstruct_participant(model).rows() == 60);
}

TEST_CASE("rank-2 reconstruction equals an independent H times W") {
    std::mt19937_64 rng(9);
    const auto model = fit_participant_model(trajectory_from(planar_data(150, rng)));
    CHECK(max_abs_diff(reconstruct_participant(model), test::naive_multiply(model.scores, model.loadings)) < 1e-12);
}

TEST_CASE("participant model invariants") {
    std::mt19937_64 rng(10);
    Matrix x = test::random_matrix(500, kChannelCount, rng, 0.01);
    for (std::size_t r = 0; r < x.rows(); ++r)
        for (std::size_t c = 0; c < kChannelCount; ++c) x(r, c) += 0.2 * std::sin(0.05 * r + c) + 0.1 * std::cos(0.11 * r * (c % 3 + 1));
    const auto model = fit_participant_model(trajectory_from(x));
    CHECK(max_abs_diff(multiply_transposed(model.loadings, model.loadings), Matrix::identity(model.n_components)) < 1e-10);
    double cum = 0.0;
    for (std::size_t i = 0; i < model.n_components; ++i) cum += model.explained_variance_ratio[i];
    CHECK(cum >= 0.95);
    for (std::size_t i = 0; i < model.n_components; ++i) {
        double m = 0.0;
        for (std::size_t r = 0; r < model.scores.rows(); ++r) m += model.scores(r, i);
        CHECK(std::abs(m / static_cast<double>(model.scores.rows())) < 1e-9);
    }
    // Largest-magnitude entry of every loading is positive.
    for (std::size_t i = 0; i < model.n_components; ++i) {
        const auto row = model.loadings.row(i);
        const auto it = std::max_element(row.begin(), row.end(), [](double a, double b) { return std::abs(a) < std::abs(b); });
        CHECK(*it > 0.0);
    }
}

TEST_CASE("retained-n rule is monotone in the threshold") {
    std::mt19937_64 rng(11);
    const auto pca = fit_pca(test::random_matrix(300, 12, rng));
    std::size_t prev = 0;
    for (double th = 0.05; th <= 1.0; th += 0.05) {
        const std::size_t n = components_for_variance(pca.explained_variance_ratio, th);
        CHECK(n >= prev);
        prev = n;
    }
}

TEST_CASE("PCA sign convention is deterministic across repeated fits") {
    std::mt19937_64 rng(12);
    const Matrix x = test::random_matrix(100, kChannelCount, rng);
    const auto first = fit_participant_model(trajectory_from(x));
    for (int i = 0; i < 100; ++i) REQUIRE(fit_participant_model(trajectory_from(x)).loadings == first.loadings);
}

TEST_CASE("participant model preconditions") {
    CHECK_THROWS_WITH_AS(fit_participant_model(test::constant_trajectory(45)), doctest::Contains("t >= 46"), Error);
    CHECK_THROWS_WITH_AS(fit_participant_model(test::constant_trajectory(60)), doctest::Contains("zero total variance"), Error);
}

TEST_CASE("exact sinusoid is recovered") {
    std::vector<double> s(2001);
    for (std::size_t t = 0; t < s.size(); ++t) s[t] = 2.0 * std::sin(0.1 * t + 0.5);
    const auto fit = fit_sinusoid(s);
    CHECK(fit.amplitude == doctest::Approx(2.0).epsilon(1e-6));
    CHECK(fit.omega == doctest::Approx(0.1).epsilon(1e-6));
    CHECK(fit.phase == doctest::Approx(0.5).epsilon(1e-6));
    CHECK(fit.r2 > 0.999999);
}

TEST_CASE("flat input has no dominant frequency") {
    std::vector<double> zeros(500, 0.0);
    CHECK_THROWS_WITH_AS(fit_sinusoid(zeros), doctest::Contains("flat spectrum"), Error);
}

TEST_CASE("fewer than three periods is rejected") {
    std::vector<double> s(100);
    for (std::size_t t = 0; t < s.size(); ++t) s[t] = std::sin(kTwoPi * t / 60.0);
    CHECK_THROWS_AS(fit_sinusoid(s), Error);
}

TEST_CASE("sinusoid fit is amplitude equivariant") {
    std::mt19937_64 rng(13);
    std::normal_distribution<double> g(0.0, 0.05);
    std::vector<double> s(800);
    for (std::size_t t = 0; t < s.size(); ++t) s[t] = 1.3 * std::sin(0.21 * t - 1.0) + g(rng);
    const auto base = fit_sinusoid(s);
    for (double k : {3.0, -0.5}) {
        std::vector<double> scaled(s);
        for (double& v : scaled) v *= k;
        const auto fit = fit_sinusoid(scaled);
        CHECK(fit.amplitude == doctest::Approx(std::abs(k) * base.amplitude).epsilon(1e-9));
        CHECK(fit.omega == doctest::Approx(base.omega).epsilon(1e-9));
        CHECK(fit.r2 == doctest::Approx(base.r2).epsilon(1e-9));
    }
}

TEST_CASE("noisy sinusoids recover amplitude and frequency within 1%") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        const double c = 0.5 + 2.0 * u(rng), w = 0.05 + 0.3 * u(rng), phi = kTwoPi * u(rng) - std::numbers::pi;
        std::normal_distribution<double> g(0.0, 0.01 * c);
        std::vector<double> s(1000);
        for (std::size_t t = 0; t < s.size(); ++t) s[t] = c * std::sin(w * t + phi) + g(rng);
        const auto fit = fit_sinusoid(s);
        CHECK(std::abs(fit.amplitude / c - 1.0) < 0.01);
        CHECK(std::abs(fit.omega / w - 1.0) < 0.01);
        CHECK(fit.amplitude >= 0.0);
        CHECK(fit.r2 <= 1.0);
    }
}

TEST_CASE("no-phase mode fits the literal model with a sign-carrying phase") {
    std::vector<double> s(1000);
    for (std::size_t t = 0; t < s.size(); ++t) s[t] = -1.5 * std::sin(0.2 * t);
    const auto fit = fit_sinusoid(s, PhaseMode::none);
    CHECK(fit.amplitude == doctest::Approx(1.5).epsilon(1e-6));
    CHECK(fit.omega == doctest::Approx(0.2).epsilon(1e-6));
    CHECK(std::abs(std::abs(fit.phase) - std::numbers::pi) < 1e-12);
}

TEST_CASE("normative model recovers known loadings and frequencies") {
    std::mt19937_64 rng(14);
    const Matrix truth = random_orthonormal_rows(4, rng);
    const double w1 = kTwoPi / 100.0;
    const double amp[4] = {4.0, 3.0, 2.0, 1.0};
    const double phase[4] = {0.3, -1.0, 2.0, 0.7};
    Matrix x(2000, kChannelCount);
    for (std::size_t r = 0; r < x.rows(); ++r)
        for (std::size_t i = 0; i < 4; ++i) {
            const double h = amp[i] * std::sin(w1 * (i + 1) * r + phase[i]);
            for (std::size_t c = 0; c < kChannelCount; ++c) x(r, c) += h * truth(i, c) + (i == 0 ? 0.5 : 0.0);
        }
    NormativeOptions opts;
    opts.pooling = NormativePooling::raw_concat;
    const std::vector<JointTrajectory> subjects = {trajectory_from(x)};
    const auto nm = fit_normative_model(subjects, opts);
    REQUIRE(nm.loadings.rows() == 4);
    const auto angles = principal_angles(orthonormal_basis(nm.loadings), orthonormal_basis(truth));
    for (double th : angles.thetas) CHECK(th < 1e-6);
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(nm.sinusoids[i].omega == doctest::Approx(w1 * (i + 1)).epsilon(1e-6));
        CHECK(nm.sinusoids[i].r2 > 0.999999);
    }
    CHECK(max_abs_diff(multiply_transposed(nm.loadings, nm.loadings), Matrix::identity(4)) < 1e-10);
}

TEST_CASE("rank-3 pooled data has fewer than 4 components") {
    std::mt19937_64 rng(15);
    const Matrix basis = random_orthonormal_rows(3, rng);
    Matrix x(400, kChannelCount);
    for (std::size_t r = 0; r < x.rows(); ++r)
        for (std::size_t i = 0; i < 3; ++i)
            for (std::size_t c = 0; c < kChannelCount; ++c) x(r, c) += std::sin(0.07 * (i + 1) * r) * basis(i, c);
    NormativeOptions opts;
    opts.pooling = NormativePooling::raw_concat;
    const std::vector<JointTrajectory> subjects = {trajectory_from(x)};
    CHECK_THROWS_WITH_AS(fit_normative_model(subjects, opts), doctest::Contains("fewer than 4 components"), Error);
}

TEST_CASE("time normalization resamples each cycle to a fixed length") {
    JointTrajectory traj = test::constant_trajectory(31);
    for (std::size_t r = 0; r < 31; ++r) traj.samples(r, 0) = static_cast<double>(r);
    traj.cycle_starts = {0, 10, 30};
    const Matrix m = time_normalize(traj, 11);
    REQUIRE(m.rows() == 22);
    CHECK(m(0, 0) == 0.0);
    CHECK(m(10, 0) == doctest::Approx(10.0));
    CHECK(m(11, 0) == doctest::Approx(10.0));
    CHECK(m(16, 0) == doctest::Approx(20.0));
    CHECK(m(21, 0) == doctest::Approx(30.0));
}

namespace {

NormativeModel single_component_model(double c, double omega, double phi) {
    NormativeModel nm;
    nm.loadings = Matrix(4, kChannelCount);
    for (std::size_t i = 0; i < 4; ++i) nm.loadings(i, i * 3) = 1.0;
    nm.loadings(0, 0) = 0.6;
    nm.loadings(0, 1) = 0.8;
    nm.sinusoids.resize(4);
    for (auto& s : nm.sinusoids) s.omega = 0.1;
    nm.sinusoids[0] = {c, omega, phi, 1.0, 0};
    return nm;
}

}  // namespace

TEST_CASE("normative reconstruction with zero amplitudes is zero") {
    CHECK(max_abs(reconstruct_normative(single_component_model(0.0, 0.1, 0.0), 50)) == 0.0);
}

TEST_CASE("single-component normative reconstruction evaluates t = 1..T") {
    const auto nm = single_component_model(1.0, kTwoPi / 100.0, 0.0);
    const Matrix n = reconstruct_normative(nm, 100);
    for (std::size_t r = 0; r < 100; ++r) {
        const double s = std::sin(kTwoPi * static_cast<double>(r + 1) / 100.0);
        for (std::size_t c = 0; c < kChannelCount; ++c) REQUIRE(n(r, c) == doctest::Approx(nm.loadings(0, c) * s).scale(1.0).epsilon(1e-14));
    }
}

TEST_CASE("harmonic normative reconstruction is periodic") {
    NormativeModel nm = single_component_model(1.0, kTwoPi / 50.0, 0.2);
    for (std::size_t i = 1; i < 4; ++i) nm.sinusoids[i] = {0.5 / i, kTwoPi * (i + 1) / 50.0, 0.1 * i, 1.0, 0};
    const Matrix n = reconstruct_normative(nm, 300);
    double diff = 0.0, ref = 0.0;
    for (std::size_t r = 0; r + 50 < 300; ++r)
        for (std::size_t c = 0; c < kChannelCount; ++c) {
            diff += std::pow(n(r, c) - n(r + 50, c), 2);
            ref += n(r, c) * n(r, c);
        }
    CHECK(std::sqrt(diff / ref) < 0.01);
}

TEST_CASE("align_cadence rescales frequencies to the new cycle length") {
    NormativeModel nm = single_component_model(1.0, kTwoPi / 101.0, 0.0);
    nm.samples_per_cycle = 101.0;
    const auto aligned = align_cadence(nm, 120.0);
    CHECK(aligned.sinusoids[0].omega == doctest::Approx(kTwoPi / 120.0).epsilon(1e-14));
    CHECK(aligned.samples_per_cycle == 120.0);
}
