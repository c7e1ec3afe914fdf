#pragma once

// PCA gait models: the participant's own walking and a sinusoid-
// parameterized normative walking model.

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "scomo/linalg.hpp"
#include "scomo/mocap.hpp"

namespace scomo {

/// Principal components of a t x d data matrix: eigen-decomposition of the
/// 1/(t-1) covariance, loadings as rows, descending eigenvalues. Each loading
/// is sign-fixed so its largest-magnitude entry is positive.
struct Pca {
    std::vector<double> mean;
    std::vector<double> eigenvalues;
    std::vector<double> explained_variance_ratio;
    Matrix loadings;  // d x d
};

Pca fit_pca(const Matrix& data);

/// Flips each row so its largest-magnitude entry is positive (first index
/// wins ties).
void apply_sign_convention(Matrix& loadings);

/// Smallest n whose cumulative explained variance reaches `threshold`.
std::size_t components_for_variance(std::span<const double> explained_ratio, double threshold);

struct ParticipantModel {
    std::vector<double> mean_posture;  // C, 45
    Matrix loadings;                   // W_p, n x 45
    Matrix scores;                     // H_p, t x n
    std::size_t n_components = 0;
    std::vector<double> explained_variance_ratio;  // all 45 components
    std::size_t t_length = 0;
    double rate_hz = 100.0;
    double mean_cycle_samples = 0.0;  // 0 when cycle bounds are unknown
};

struct ParticipantModelOptions {
    double variance_threshold = 0.95;
    std::optional<std::size_t> components;  // overrides the threshold rule
};

ParticipantModel fit_participant_model(const GaitCycleSet& cycles, const ParticipantModelOptions& options = {});
ParticipantModel fit_participant_model(const JointTrajectory& traj, const ParticipantModelOptions& options = {});

/// P = H_p W_p (t x 45), without the mean posture.
Matrix reconstruct_participant(const ParticipantModel& model);

enum class PhaseMode {
    free,  // c sin(omega t + phi)
    none,  // c sin(omega t), phi restricted to {0, pi} so that c >= 0
};

struct SinusoidFit {
    double amplitude = 0.0;  // c
    double omega = 0.0;      // rad/sample
    double phase = 0.0;      // rad, in (-pi, pi]
    double r2 = 0.0;
    int iterations = 0;

    double operator()(double t) const;
};

/// Fits c sin(omega t + phi) with t the sample index (first sample t = 0).
SinusoidFit fit_sinusoid(std::span<const double> series, PhaseMode mode = PhaseMode::free);

enum class NormativePooling { time_normalized, raw_concat };

std::string_view to_string(NormativePooling pooling);
std::string_view to_string(PhaseMode mode);

inline constexpr std::size_t kNormativeComponents = 4;
inline constexpr std::size_t kNormalizedCycleSamples = 101;

struct NormativeModel {
    Matrix loadings;  // W_n, 4 x 45
    std::vector<SinusoidFit> sinusoids;
    std::vector<double> explained_variance_ratio;
    NormativePooling pooling = NormativePooling::time_normalized;
    PhaseMode phase_mode = PhaseMode::free;
    // Cycle length of the time base omega is expressed in; 0 when unknown.
    double samples_per_cycle = 0.0;
    std::size_t n_subjects = 0;

    std::vector<double> fit_r2() const;
};

struct NormativeOptions {
    NormativePooling pooling = NormativePooling::time_normalized;
    std::size_t cycle_samples = kNormalizedCycleSamples;
    PhaseMode phase_mode = PhaseMode::free;
};

/// Resamples each [cycle_starts[i], cycle_starts[i+1]] span to
/// `samples_per_cycle` points (both ends included) and concatenates them.
Matrix time_normalize(const JointTrajectory& traj, std::size_t samples_per_cycle);

NormativeModel fit_normative_model(std::span<const JointTrajectory> subjects, const NormativeOptions& options = {});

/// N = H_s W_n evaluated at t = 1..t_length.
Matrix reconstruct_normative(const NormativeModel& model, std::size_t t_length);

/// Rescales every omega so the normative stride lasts `samples_per_cycle`
/// samples.
NormativeModel align_cadence(const NormativeModel& model, double samples_per_cycle);

}  // namespace scomo
