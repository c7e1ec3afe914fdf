#include "scomo/mocap.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>
#include <sstream>

#include "scomo/error.hpp"

namespace scomo {

std::string_view to_string(Side side) {
    return side == Side::robotic ? "robotic" : "contralateral";
}

Side parse_side(std::string_view text) {
    if (text == "robotic") return Side::robotic;
    if (text == "contralateral") return Side::contralateral;
    throw Error(ErrorKind::invalid_argument, "unknown side '" + std::string(text) + "'");
}

Joint ankle_of(Side side, BodySide robotic_side) {
    const bool left = (side == Side::robotic) == (robotic_side == BodySide::left);
    return left ? Joint::left_ankle : Joint::right_ankle;
}

void JointTrajectory::validate() const {
    if (samples.cols() != kChannelCount)
        throw Error(ErrorKind::invalid_data, "trajectory: column count " + std::to_string(samples.cols()) +
                                                 " (expected 45)");
    if (!(rate_hz > 0.0) || !std::isfinite(rate_hz))
        throw Error(ErrorKind::invalid_data, "trajectory: rate_hz must be positive");
    for (double v : samples.values())
        if (!std::isfinite(v)) throw Error(ErrorKind::invalid_data, "trajectory: non-finite sample");
}

GaitEvents merge_events(const GaitEvents& a, const GaitEvents& b) {
    GaitEvents out = a;
    auto take = [](SideEvents& dst, const SideEvents& src) {
        if (!src.heel_strikes.empty() || !src.toe_offs.empty()) dst = src;
    };
    take(out.robotic, b.robotic);
    take(out.contralateral, b.contralateral);
    out.warnings.insert(out.warnings.end(), b.warnings.begin(), b.warnings.end());
    return out;
}

GaitEvents restrict_events(const GaitEvents& events, std::size_t begin, std::size_t end) {
    auto cut = [&](const std::vector<std::size_t>& v) {
        std::vector<std::size_t> out;
        for (std::size_t i : v)
            if (i >= begin && i < end) out.push_back(i - begin);
        return out;
    };
    GaitEvents out;
    out.robotic = {cut(events.robotic.heel_strikes), cut(events.robotic.toe_offs)};
    out.contralateral = {cut(events.contralateral.heel_strikes), cut(events.contralateral.toe_offs)};
    out.warnings = events.warnings;
    return out;
}

double GaitCycleSet::mean_cycle_samples() const {
    if (cycle_bounds.empty()) return 0.0;
    double total = 0.0;
    for (const auto& [b, e] : cycle_bounds) total += static_cast<double>(e - b);
    return total / static_cast<double>(cycle_bounds.size());
}

// --- parsing --------------------------------------------------------------

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::map<std::string, std::string, std::less<>> parse_header(const std::string& line) {
    std::string_view s = trim(line);
    if (s.empty() || s.front() != '#') throw Error(ErrorKind::invalid_data, "malformed header: missing '#'");
    s.remove_prefix(1);
    std::map<std::string, std::string, std::less<>> kv;
    while (!s.empty()) {
        const auto comma = s.find(',');
        const std::string_view item = trim(s.substr(0, comma));
        s = comma == std::string_view::npos ? std::string_view{} : s.substr(comma + 1);
        if (item.empty()) continue;
        const auto eq = item.find('=');
        if (eq == std::string_view::npos)
            throw Error(ErrorKind::invalid_data, "malformed header: '" + std::string(item) + "'");
        kv.emplace(std::string(trim(item.substr(0, eq))), std::string(trim(item.substr(eq + 1))));
    }
    return kv;
}

double parse_number(std::string_view field) {
    field = trim(field);
    if (field.empty() || field == "nan" || field == "NaN" || field == "NAN")
        return std::numeric_limits<double>::quiet_NaN();
    if (field.front() == '+') field.remove_prefix(1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (ec != std::errc{} || ptr != field.data() + field.size())
        throw Error(ErrorKind::invalid_data, "malformed number '" + std::string(field) + "'");
    return v;
}

double header_rate(const std::map<std::string, std::string, std::less<>>& kv) {
    const auto it = kv.find("rate_hz");
    if (it == kv.end()) throw Error(ErrorKind::invalid_data, "malformed header: missing rate_hz");
    const double rate = parse_number(it->second);
    if (!(rate > 0.0) || !std::isfinite(rate))
        throw Error(ErrorKind::invalid_data, "malformed header: rate_hz must be positive");
    return rate;
}

std::vector<std::vector<double>> parse_rows(std::istream& in, std::size_t expected_cols) {
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string_view s = trim(line);
        if (s.empty() || s.front() == '#') continue;
        std::vector<double> row;
        row.reserve(expected_cols);
        std::size_t start = 0;
        while (true) {
            const auto comma = s.find(',', start);
            row.push_back(parse_number(s.substr(start, comma - start)));
            if (comma == std::string_view::npos) break;
            start = comma + 1;
        }
        if (row.size() != expected_cols)
            throw Error(ErrorKind::invalid_data, "column count " + std::to_string(row.size()) + " on line " +
                                                     std::to_string(line_no) + " (expected " +
                                                     std::to_string(expected_cols) + ")");
        rows.push_back(std::move(row));
    }
    return rows;
}

// Linear interpolation of interior NaN runs up to kMaxInterpolatedGap long;
// runs touching either end are filled with the nearest valid sample.
void repair_gaps(Matrix& m) {
    const std::size_t t = m.rows();
    for (std::size_t c = 0; c < m.cols(); ++c) {
        std::size_t r = 0;
        while (r < t) {
            if (!std::isnan(m(r, c))) {
                ++r;
                continue;
            }
            std::size_t end = r;
            while (end < t && std::isnan(m(end, c))) ++end;
            const std::size_t len = end - r;
            if (len > kMaxInterpolatedGap)
                throw Error(ErrorKind::invalid_data, "NaN gap of " + std::to_string(len) + " samples in column " +
                                                         std::to_string(c) + " exceeds " +
                                                         std::to_string(kMaxInterpolatedGap));
            if (r == 0 && end == t)
                throw Error(ErrorKind::invalid_data, "column " + std::to_string(c) + " is entirely NaN");
            if (r == 0) {
                for (std::size_t i = r; i < end; ++i) m(i, c) = m(end, c);
            } else if (end == t) {
                for (std::size_t i = r; i < end; ++i) m(i, c) = m(r - 1, c);
            } else {
                const double a = m(r - 1, c);
                const double b = m(end, c);
                const double span = static_cast<double>(len + 1);
                for (std::size_t i = r; i < end; ++i)
                    m(i, c) = a + (b - a) * static_cast<double>(i - r + 1) / span;
            }
            r = end;
        }
    }
}

std::string format_fixed(double v, int precision) {
    char buf[64];
    const int n = std::snprintf(buf, sizeof buf, "%.*f", precision, v);
    std::string s(buf, static_cast<std::size_t>(n));
    if (s.front() == '-' && s.find_first_not_of("-0.") == std::string::npos) s.erase(0, 1);
    return s;
}

}  // namespace

JointTrajectory parse_trajectory(std::istream& in) {
    std::string header;
    if (!std::getline(in, header)) throw Error(ErrorKind::invalid_data, "malformed header: empty file");
    const auto kv = parse_header(header);

    JointTrajectory traj;
    traj.rate_hz = header_rate(kv);
    double scale = 1.0;
    if (const auto it = kv.find("units"); it != kv.end()) {
        if (it->second == "mm")
            scale = 1e-3;
        else if (it->second != "m")
            throw Error(ErrorKind::invalid_data, "malformed header: units must be m or mm");
    }
    if (const auto it = kv.find("cycles"); it != kv.end() && !it->second.empty()) {
        std::string_view list = it->second;
        while (!list.empty()) {
            const auto semi = list.find(';');
            const double v = parse_number(list.substr(0, semi));
            if (!(v >= 0.0) || v != std::floor(v))
                throw Error(ErrorKind::invalid_data, "malformed header: bad cycles entry");
            traj.cycle_starts.push_back(static_cast<std::size_t>(v));
            list = semi == std::string_view::npos ? std::string_view{} : list.substr(semi + 1);
        }
        if (!std::is_sorted(traj.cycle_starts.begin(), traj.cycle_starts.end()))
            throw Error(ErrorKind::invalid_data, "malformed header: cycles not increasing");
    }

    const auto rows = parse_rows(in, kChannelCount);
    if (rows.empty()) throw Error(ErrorKind::invalid_data, "trajectory has no samples");
    traj.samples = Matrix::from_rows(rows);
    repair_gaps(traj.samples);
    if (scale != 1.0)
        for (std::size_t r = 0; r < traj.samples.rows(); ++r)
            for (double& v : traj.samples.row(r)) v *= scale;
    for (std::size_t c : traj.cycle_starts)
        if (c > traj.length()) throw Error(ErrorKind::invalid_data, "malformed header: cycles beyond data");
    traj.validate();
    return traj;
}

JointTrajectory load_trajectory(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::io, "cannot open trajectory file " + path.string());
    try {
        return parse_trajectory(in);
    } catch (const Error& e) {
        throw Error(e.kind(), path.filename().string() + ": " + e.what());
    }
}

void write_trajectory(std::ostream& out, const JointTrajectory& traj, int precision) {
    out << "# rate_hz=" << traj.rate_hz << ", units=m";
    if (!traj.cycle_starts.empty()) {
        out << ", cycles=";
        for (std::size_t i = 0; i < traj.cycle_starts.size(); ++i)
            out << (i ? ";" : "") << traj.cycle_starts[i];
    }
    out << '\n';
    std::string line;
    for (std::size_t r = 0; r < traj.samples.rows(); ++r) {
        line.clear();
        for (std::size_t c = 0; c < traj.samples.cols(); ++c) {
            if (c) line += ',';
            line += format_fixed(traj.samples(r, c), precision);
        }
        line += '\n';
        out << line;
    }
}

ForcePlateRecord parse_grf(std::istream& in) {
    std::string header;
    if (!std::getline(in, header)) throw Error(ErrorKind::invalid_data, "malformed header: empty file");
    const auto kv = parse_header(header);
    ForcePlateRecord grf;
    grf.rate_hz = header_rate(kv);
    const auto side = kv.find("side");
    if (side == kv.end()) throw Error(ErrorKind::invalid_data, "malformed header: missing side");
    try {
        grf.side = parse_side(side->second);
    } catch (const Error&) {
        throw Error(ErrorKind::invalid_data, "malformed header: side must be robotic or contralateral");
    }
    for (const auto& row : parse_rows(in, 1)) {
        if (!std::isfinite(row[0])) throw Error(ErrorKind::invalid_data, "GRF: non-finite sample");
        grf.vertical_grf.push_back(row[0]);
    }
    if (grf.vertical_grf.empty()) throw Error(ErrorKind::invalid_data, "GRF has no samples");
    return grf;
}

ForcePlateRecord load_grf(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::io, "cannot open GRF file " + path.string());
    try {
        return parse_grf(in);
    } catch (const Error& e) {
        throw Error(e.kind(), path.filename().string() + ": " + e.what());
    }
}

void write_grf(std::ostream& out, const ForcePlateRecord& grf, int precision) {
    out << "# rate_hz=" << grf.rate_hz << ", side=" << to_string(grf.side) << '\n';
    for (double v : grf.vertical_grf) out << format_fixed(v, precision) << '\n';
}

// --- filtering ------------------------------------------------------------

kernels::BiquadCoefficients butterworth_lowpass(double cutoff_hz, double rate_hz) {
    if (!(rate_hz > 0.0)) throw Error(ErrorKind::invalid_argument, "lowpass: rate must be positive");
    if (!(cutoff_hz > 0.0) || cutoff_hz >= rate_hz / 2.0)
        throw Error(ErrorKind::invalid_argument, "lowpass: cutoff must lie in (0, Nyquist)");
    const double k = std::tan(std::numbers::pi * cutoff_hz / rate_hz);
    const double k2 = k * k;
    const double norm = 1.0 / (1.0 + std::numbers::sqrt2 * k + k2);
    kernels::BiquadCoefficients c;
    c.b0 = k2 * norm;
    c.b1 = 2.0 * c.b0;
    c.b2 = c.b0;
    c.a1 = 2.0 * (k2 - 1.0) * norm;
    c.a2 = (1.0 - std::numbers::sqrt2 * k + k2) * norm;
    return c;
}

namespace {

// One causal pass with the state primed to the steady-state response of a
// step at the first row's level.
void causal_pass(const kernels::BiquadCoefficients& k, Matrix& buf) {
    const std::size_t ch = buf.cols();
    const double dc = (k.b0 + k.b1 + k.b2) / (1.0 + k.a1 + k.a2);
    std::vector<double> z1(ch), z2(ch);
    for (std::size_t c = 0; c < ch; ++c) {
        const double x0 = buf(0, c);
        z1[c] = (dc - k.b0) * x0;
        z2[c] = (k.b2 - k.a2 * dc) * x0;
    }
    kernels::active().biquad(k, buf.data(), buf.data(), buf.rows(), ch, z1.data(), z2.data());
}

void reverse_rows(Matrix& m) {
    for (std::size_t i = 0, j = m.rows(); i + 1 < j; ++i, --j)
        std::swap_ranges(m.row(i).begin(), m.row(i).end(), m.row(j - 1).begin());
}

}  // namespace

Matrix filtfilt(const kernels::BiquadCoefficients& k, const Matrix& x) {
    const std::size_t t = x.rows();
    const std::size_t ch = x.cols();
    if (t < 3 * kFiltfiltOrder)
        throw Error(ErrorKind::invalid_argument, "lowpass: trajectory too short for edge padding (" +
                                                     std::to_string(t) + " samples)");
    const std::size_t pad = std::min(3 * kFiltfiltOrder, t - 1);

    // Odd extension about both end samples.
    Matrix buf(t + 2 * pad, ch);
    for (std::size_t c = 0; c < ch; ++c) {
        const double first = x(0, c);
        const double last = x(t - 1, c);
        for (std::size_t i = 0; i < pad; ++i) buf(i, c) = 2.0 * first - x(pad - i, c);
        for (std::size_t i = 0; i < t; ++i) buf(pad + i, c) = x(i, c);
        for (std::size_t i = 0; i < pad; ++i) buf(pad + t + i, c) = 2.0 * last - x(t - 2 - i, c);
    }
    causal_pass(k, buf);
    reverse_rows(buf);
    causal_pass(k, buf);
    reverse_rows(buf);

    Matrix out(t, ch);
    std::copy(buf.row(pad).data(), buf.row(pad).data() + t * ch, out.data());
    return out;
}

JointTrajectory lowpass_filter(const JointTrajectory& traj, double cutoff_hz) {
    const auto k = butterworth_lowpass(cutoff_hz, traj.rate_hz);
    JointTrajectory out = traj;
    out.samples = filtfilt(k, traj.samples);
    return out;
}

// --- gait events ----------------------------------------------------------

ForcePlateRecord remove_zero_offset(const ForcePlateRecord& grf) {
    ForcePlateRecord out = grf;
    if (grf.vertical_grf.empty()) return out;
    std::vector<double> sorted = grf.vertical_grf;
    std::sort(sorted.begin(), sorted.end());
    const double floor = sorted[sorted.size() / 50];
    const auto end = std::upper_bound(sorted.begin(), sorted.end(), floor + kUnloadedBandN);
    const auto count = static_cast<std::size_t>(end - sorted.begin());
    const double baseline = count % 2 ? sorted[count / 2] : 0.5 * (sorted[count / 2 - 1] + sorted[count / 2]);
    for (double& v : out.vertical_grf) v = std::max(0.0, v - baseline);
    return out;
}

GaitEvents detect_gait_events(const ForcePlateRecord& grf, const EventDetectionOptions& options) {
    if (!(options.threshold_n > 0.0))
        throw Error(ErrorKind::invalid_argument, "detect_gait_events: threshold must be positive");
    if (!(grf.rate_hz > 0.0) || !(options.kinematics_rate_hz > 0.0))
        throw Error(ErrorKind::invalid_argument, "detect_gait_events: rates must be positive");
    if (grf.rate_hz < options.kinematics_rate_hz)
        throw Error(ErrorKind::invalid_argument, "detect_gait_events: GRF rate below kinematics rate");

    const auto& f = grf.vertical_grf;
    const std::size_t n = f.size();
    const auto hold = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(options.debounce_ms * 1e-3 * grf.rate_hz)));
    auto loaded = [&](std::size_t i) { return f[i] > options.threshold_n; };

    // Raw-rate events; a transition counts only when the new state holds for
    // `hold` consecutive samples.
    std::vector<std::size_t> hs_raw, to_raw;
    if (n > 0) {
        bool state = loaded(0);
        std::size_t i = 1;
        while (i < n) {
            if (loaded(i) == state) {
                ++i;
                continue;
            }
            const bool next = !state;
            std::size_t j = i;
            while (j < n && j - i < hold && loaded(j) == next) ++j;
            if (j - i == hold) {
                (next ? hs_raw : to_raw).push_back(i);
                state = next;
                i = j;
            } else {
                i = j == i ? i + 1 : j;
            }
        }
    }
    if (hs_raw.empty() && to_raw.empty())
        throw Error(ErrorKind::invalid_data, "detect_gait_events: no crossings of " +
                                                 std::to_string(options.threshold_n) + " N");

    GaitEvents out;
    const double ratio = options.kinematics_rate_hz / grf.rate_hz;
    auto convert = [&](const std::vector<std::size_t>& raw) {
        std::vector<std::size_t> v;
        v.reserve(raw.size());
        for (std::size_t i : raw) v.push_back(static_cast<std::size_t>(std::llround(static_cast<double>(i) * ratio)));
        return v;
    };
    SideEvents& side = out.side(grf.side);
    side.heel_strikes = convert(hs_raw);
    side.toe_offs = convert(to_raw);

    std::vector<std::pair<std::size_t, const char*>> all;
    for (std::size_t i : hs_raw) all.emplace_back(i, "heel strike");
    for (std::size_t i : to_raw) all.emplace_back(i, "toe-off");
    std::sort(all.begin(), all.end());
    const double min_gap = options.chatter_ms * 1e-3 * grf.rate_hz;
    for (std::size_t i = 1; i < all.size(); ++i) {
        if (static_cast<double>(all[i].first - all[i - 1].first) < min_gap) {
            out.warnings.push_back(std::string(to_string(grf.side)) + ": " + all[i - 1].second + " at " +
                                   std::to_string(all[i - 1].first) + " and " + all[i].second + " at " +
                                   std::to_string(all[i].first) + " closer than " +
                                   std::to_string(static_cast<int>(options.chatter_ms)) + " ms");
        }
    }
    return out;
}

// --- segmentation ---------------------------------------------------------

GaitCycleSet segment_cycles(const JointTrajectory& traj, const GaitEvents& events, std::size_t n, Side side) {
    if (n < 2) throw Error(ErrorKind::invalid_argument, "segment_cycles: need at least 2 cycles");
    std::vector<std::size_t> strikes;
    for (std::size_t hs : events.side(side).heel_strikes)
        if (hs <= traj.length()) strikes.push_back(hs);
    std::sort(strikes.begin(), strikes.end());
    strikes.erase(std::unique(strikes.begin(), strikes.end()), strikes.end());
    if (strikes.size() < n + 1)
        throw Error(ErrorKind::invalid_data, "segment_cycles: insufficient cycles (" +
                                                 std::to_string(strikes.size()) + " heel strikes on " +
                                                 std::string(to_string(side)) + " side, need " +
                                                 std::to_string(n + 1) + ")");
    const std::vector<std::size_t> used(strikes.end() - static_cast<std::ptrdiff_t>(n + 1), strikes.end());
    const std::size_t begin = used.front();
    const std::size_t end = used.back();

    GaitCycleSet set;
    set.offset = begin;
    set.side = side;
    set.trajectory.rate_hz = traj.rate_hz;
    set.trajectory.samples = Matrix(end - begin, traj.samples.cols());
    std::copy(traj.samples.row(begin).data(), traj.samples.row(begin).data() + (end - begin) * traj.samples.cols(),
              set.trajectory.samples.data());
    for (std::size_t i = 0; i + 1 < used.size(); ++i) {
        set.cycle_bounds.emplace_back(used[i] - begin, used[i + 1] - begin);
        set.trajectory.cycle_starts.push_back(used[i] - begin);
    }
    set.trajectory.cycle_starts.push_back(end - begin);
    return set;
}

}  // namespace scomo
