#pragma once

// Motion-capture ingestion: joint-center trajectories, vertical GRF, gait
// events and gait-cycle segmentation.

#include <array>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "scomo/kernels.hpp"
#include "scomo/linalg.hpp"

namespace scomo {

enum class Joint : std::size_t {
    left_ankle,
    right_ankle,
    left_knee,
    right_knee,
    left_hip,
    right_hip,
    left_wrist,
    right_wrist,
    left_elbow,
    right_elbow,
    left_shoulder,
    right_shoulder,
    pelvis,
    sternum,
    head,
};

inline constexpr std::size_t kJointCount = 15;
inline constexpr std::size_t kChannelCount = 3 * kJointCount;

inline constexpr std::array<std::string_view, kJointCount> kJointNames = {
    "left_ankle",  "right_ankle",  "left_knee",     "right_knee",     "left_hip",
    "right_hip",   "left_wrist",   "right_wrist",   "left_elbow",     "right_elbow",
    "left_shoulder", "right_shoulder", "pelvis",    "sternum",        "head",
};

/// X is medio-lateral, Y anterior-posterior (forward positive), Z vertical.
enum class Axis : std::size_t { x = 0, y = 1, z = 2 };

constexpr std::size_t channel(Joint j, Axis a) {
    return 3 * static_cast<std::size_t>(j) + static_cast<std::size_t>(a);
}

enum class Side { robotic, contralateral };

std::string_view to_string(Side side);
Side parse_side(std::string_view text);

/// Which anatomical side carries the robotic leg.
enum class BodySide { left, right };

Joint ankle_of(Side side, BodySide robotic_side);

struct JointTrajectory {
    Matrix samples;  // t x 45, meters
    double rate_hz = 100.0;
    // Optional heel-strike sample indices carried in the file header; used
    // for time-normalized pooling of normative data.
    std::vector<std::size_t> cycle_starts;

    std::size_t length() const noexcept { return samples.rows(); }
    double at(std::size_t t, Joint j, Axis a) const { return samples(t, channel(j, a)); }

    static constexpr const std::array<std::string_view, kJointCount>& joint_order() { return kJointNames; }

    /// Throws on a broken invariant (column count, NaN, rate).
    void validate() const;
};

struct ForcePlateRecord {
    std::vector<double> vertical_grf;  // newtons
    double rate_hz = 1000.0;
    Side side = Side::robotic;
};

struct SideEvents {
    std::vector<std::size_t> heel_strikes;
    std::vector<std::size_t> toe_offs;
};

struct GaitEvents {
    SideEvents robotic;
    SideEvents contralateral;
    std::vector<std::string> warnings;

    SideEvents& side(Side s) { return s == Side::robotic ? robotic : contralateral; }
    const SideEvents& side(Side s) const { return s == Side::robotic ? robotic : contralateral; }
};

/// Combines two single-side detections into one event set.
GaitEvents merge_events(const GaitEvents& a, const GaitEvents& b);

/// Drops events outside [begin, end) and re-bases the rest to `begin`.
GaitEvents restrict_events(const GaitEvents& events, std::size_t begin, std::size_t end);

struct GaitCycleSet {
    JointTrajectory trajectory;  // rows [offset, offset + length) of the source
    std::vector<std::pair<std::size_t, std::size_t>> cycle_bounds;  // [start, end) in trajectory rows
    std::size_t offset = 0;
    Side side = Side::robotic;

    std::size_t n_cycles() const noexcept { return cycle_bounds.size(); }
    double mean_cycle_samples() const;
};

// --- file formats ---------------------------------------------------------

JointTrajectory parse_trajectory(std::istream& in);
JointTrajectory load_trajectory(const std::filesystem::path& path);
void write_trajectory(std::ostream& out, const JointTrajectory& traj, int precision = 6);

ForcePlateRecord parse_grf(std::istream& in);
ForcePlateRecord load_grf(const std::filesystem::path& path);
void write_grf(std::ostream& out, const ForcePlateRecord& grf, int precision = 3);

/// Longest NaN run that ingestion repairs by linear interpolation.
inline constexpr std::size_t kMaxInterpolatedGap = 10;

// --- filtering ------------------------------------------------------------

/// Second-order low-pass Butterworth section (bilinear transform with
/// frequency prewarping).
kernels::BiquadCoefficients butterworth_lowpass(double cutoff_hz, double rate_hz);

/// Effective order of the forward-backward filter.
inline constexpr std::size_t kFiltfiltOrder = 4;

/// Zero-phase filtering of every column of a frames x channels block.
Matrix filtfilt(const kernels::BiquadCoefficients& k, const Matrix& x);

JointTrajectory lowpass_filter(const JointTrajectory& traj, double cutoff_hz = 6.0);

// --- gait events ----------------------------------------------------------

/// Width of the band above the 2nd percentile treated as unloaded.
inline constexpr double kUnloadedBandN = 40.0;

/// Subtracts the resting baseline (median of the unloaded samples) and clips
/// to >= 0.
ForcePlateRecord remove_zero_offset(const ForcePlateRecord& grf);

struct EventDetectionOptions {
    double threshold_n = 20.0;
    double debounce_ms = 20.0;
    double kinematics_rate_hz = 100.0;
    double chatter_ms = 100.0;
};

GaitEvents detect_gait_events(const ForcePlateRecord& grf, const EventDetectionOptions& options = {});

// --- segmentation ---------------------------------------------------------

GaitCycleSet segment_cycles(const JointTrajectory& traj, const GaitEvents& events, std::size_t n = 8,
                            Side side = Side::robotic);

}  // namespace scomo
