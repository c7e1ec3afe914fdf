#pragma once

#include <cmath>
#include <numbers>
#include <random>

#include "scomo/gait_model.hpp"
#include "support.hpp"

namespace scomo::test {

// Smooth periodic 45-channel motion around a standing posture, 100 Hz.
inline JointTrajectory periodic_walk(std::size_t t, double period_samples, std::uint64_t seed, double noise = 0.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::normal_distribution<double> g(0.0, noise > 0.0 ? noise : 1.0);
    JointTrajectory traj;
    traj.samples = Matrix(t, kChannelCount);
    const double w = 2.0 * std::numbers::pi / period_samples;
    for (std::size_t c = 0; c < kChannelCount; ++c) {
        const double base = 0.1 * static_cast<double>(c % 3) + 0.3 * static_cast<double>(c / 3) / 15.0;
        const double a1 = 0.1 * u(rng), p1 = 3.0 * u(rng), a2 = 0.03 * u(rng), p2 = 3.0 * u(rng);
        for (std::size_t r = 0; r < t; ++r) {
            traj.samples(r, c) = base + a1 * std::sin(w * r + p1) + a2 * std::sin(2.0 * w * r + p2);
            if (noise > 0.0) traj.samples(r, c) += g(rng);
        }
    }
    return traj;
}

// Hand-built 4-component normative model with harmonic frequencies.
inline NormativeModel harmonic_normative(double period_samples, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    NormativeModel nm;
    nm.loadings = orthonormalize_rows(random_matrix(4, kChannelCount, rng));
    const double w = 2.0 * std::numbers::pi / period_samples;
    for (std::size_t i = 0; i < 4; ++i) nm.sinusoids.push_back({0.2 / (i + 1), w * (i + 1), 0.4 * i, 0.99, 0});
    nm.explained_variance_ratio = {0.6, 0.2, 0.1, 0.05};
    nm.samples_per_cycle = period_samples;
    nm.n_subjects = 1;
    return nm;
}

}  // namespace scomo::test
