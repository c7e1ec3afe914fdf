#include "scomo/gait_model.hpp"

#include <fftw3.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <mutex>
#include <numbers>

#include "scomo/error.hpp"
#include "scomo/kernels.hpp"

namespace scomo {

// --- PCA ------------------------------------------------------------------

void apply_sign_convention(Matrix& loadings) {
    for (std::size_t r = 0; r < loadings.rows(); ++r) {
        auto row = loadings.row(r);
        std::size_t best = 0;
        for (std::size_t c = 1; c < row.size(); ++c)
            if (std::abs(row[c]) > std::abs(row[best]) * (1.0 + 1e-12)) best = c;
        if (row[best] < 0.0)
            for (double& v : row) v = -v;
    }
}

std::size_t components_for_variance(std::span<const double> ratio, double threshold) {
    double cumulative = 0.0;
    for (std::size_t i = 0; i < ratio.size(); ++i) {
        cumulative += ratio[i];
        if (cumulative >= threshold - 1e-12) return i + 1;
    }
    return ratio.size();
}

Pca fit_pca(const Matrix& data) {
    const std::size_t t = data.rows();
    const std::size_t d = data.cols();
    if (t < 2) throw Error(ErrorKind::invalid_argument, "PCA: need at least 2 samples");
    const auto& k = kernels::active();

    Pca pca;
    pca.mean.assign(d, 0.0);
    for (std::size_t r = 0; r < t; ++r) k.axpy(1.0, data.row(r).data(), pca.mean.data(), d);
    for (double& m : pca.mean) m /= static_cast<double>(t);

    Matrix cov(d, d);
    std::vector<double> centered(d);
    for (std::size_t r = 0; r < t; ++r) {
        for (std::size_t c = 0; c < d; ++c) centered[c] = data(r, c) - pca.mean[c];
        for (std::size_t i = 0; i < d; ++i) k.axpy(centered[i], centered.data(), cov.row(i).data(), d);
    }
    const double norm = 1.0 / static_cast<double>(t - 1);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = i; j < d; ++j) {
            const double v = 0.5 * (cov(i, j) + cov(j, i)) * norm;
            cov(i, j) = v;
            cov(j, i) = v;
        }

    auto eig = symmetric_eigen(cov);
    double total = 0.0;
    for (double& v : eig.values) {
        v = std::max(v, 0.0);
        total += v;
    }
    if (!(total > 0.0)) throw Error(ErrorKind::invalid_data, "PCA: rank-deficient input (zero total variance)");
    pca.eigenvalues = eig.values;
    pca.explained_variance_ratio.resize(d);
    for (std::size_t i = 0; i < d; ++i) pca.explained_variance_ratio[i] = eig.values[i] / total;
    pca.loadings = std::move(eig.vectors);
    apply_sign_convention(pca.loadings);
    return pca;
}

namespace {

Matrix project_scores(const Matrix& data, std::span<const double> mean, const Matrix& loadings, std::size_t n) {
    const auto& k = kernels::active();
    const std::size_t d = data.cols();
    Matrix scores(data.rows(), n);
    std::vector<double> centered(d);
    for (std::size_t r = 0; r < data.rows(); ++r) {
        for (std::size_t c = 0; c < d; ++c) centered[c] = data(r, c) - mean[c];
        for (std::size_t i = 0; i < n; ++i) scores(r, i) = k.dot(centered.data(), loadings.row(i).data(), d);
    }
    return scores;
}

Matrix leading_rows(const Matrix& m, std::size_t n) {
    Matrix out(n, m.cols());
    std::copy(m.data(), m.data() + n * m.cols(), out.data());
    return out;
}

}  // namespace

ParticipantModel fit_participant_model(const JointTrajectory& traj, const ParticipantModelOptions& options) {
    if (traj.samples.cols() != kChannelCount)
        throw Error(ErrorKind::invalid_argument, "participant model: trajectory must have 45 columns");
    if (traj.length() < kChannelCount + 1)
        throw Error(ErrorKind::invalid_argument, "participant model: need t >= 46 samples, got " +
                                                     std::to_string(traj.length()));
    const Pca pca = fit_pca(traj.samples);

    ParticipantModel m;
    m.mean_posture = pca.mean;
    m.explained_variance_ratio = pca.explained_variance_ratio;
    m.n_components = options.components ? std::min(*options.components, kChannelCount)
                                        : components_for_variance(pca.explained_variance_ratio,
                                                                  options.variance_threshold);
    m.loadings = leading_rows(pca.loadings, m.n_components);
    m.scores = project_scores(traj.samples, pca.mean, m.loadings, m.n_components);
    m.t_length = traj.length();
    m.rate_hz = traj.rate_hz;
    return m;
}

ParticipantModel fit_participant_model(const GaitCycleSet& cycles, const ParticipantModelOptions& options) {
    ParticipantModel m = fit_participant_model(cycles.trajectory, options);
    m.mean_cycle_samples = cycles.mean_cycle_samples();
    return m;
}

Matrix reconstruct_participant(const ParticipantModel& model) {
    const auto& k = kernels::active();
    Matrix p(model.t_length, kChannelCount);
    for (std::size_t r = 0; r < model.t_length; ++r)
        for (std::size_t i = 0; i < model.n_components; ++i)
            k.axpy(model.scores(r, i), model.loadings.row(i).data(), p.row(r).data(), kChannelCount);
    return p;
}

// --- sinusoid fit ---------------------------------------------------------

double SinusoidFit::operator()(double t) const { return amplitude * std::sin(omega * t + phase); }

namespace {

std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

// Power at bins 0..n/2.
std::vector<double> power_spectrum(std::span<const double> x) {
    const int n = static_cast<int>(x.size());
    std::vector<double> in(x.begin(), x.end());
    std::vector<std::complex<double>> out(x.size() / 2 + 1);
    fftw_plan plan;
    {
        std::lock_guard lock(fftw_planner_mutex());
        plan = fftw_plan_dft_r2c_1d(n, in.data(), reinterpret_cast<fftw_complex*>(out.data()), FFTW_ESTIMATE);
    }
    fftw_execute(plan);
    {
        std::lock_guard lock(fftw_planner_mutex());
        fftw_destroy_plan(plan);
    }
    std::vector<double> p(out.size());
    for (std::size_t i = 0; i < out.size(); ++i) p[i] = std::norm(out[i]);
    return p;
}

double wrap_phase(double phi) {
    phi = std::remainder(phi, 2.0 * std::numbers::pi);
    if (phi <= -std::numbers::pi) phi += 2.0 * std::numbers::pi;
    return phi;
}

struct LinearFit {
    double a = 0.0;  // sin coefficient
    double b = 0.0;  // cos coefficient
    double explained = 0.0;
};

// Least squares x ~ a sin(w u) + b cos(w u) (b forced to 0 without phase);
// `explained` is the captured energy.
LinearFit project_onto(std::span<const double> x, std::span<const double> u, double w, bool with_cos) {
    double ss = 0, cc = 0, sc = 0, xs = 0, xc = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double s = std::sin(w * u[i]);
        const double c = std::cos(w * u[i]);
        ss += s * s;
        cc += c * c;
        sc += s * c;
        xs += x[i] * s;
        xc += x[i] * c;
    }
    LinearFit f;
    if (!with_cos) {
        if (ss <= 0.0) return f;
        f.a = xs / ss;
        f.explained = xs * xs / ss;
        return f;
    }
    const double det = ss * cc - sc * sc;
    if (std::abs(det) <= 1e-300) return f;
    f.a = (cc * xs - sc * xc) / det;
    f.b = (ss * xc - sc * xs) / det;
    f.explained = f.a * xs + f.b * xc;
    return f;
}

double solve_frequency(std::span<const double> x, std::span<const double> u, double lo, double hi, bool with_cos) {
    constexpr int grid = 33;
    double best_w = lo, best = -1.0;
    const double step = (hi - lo) / (grid - 1);
    for (int g = 0; g < grid; ++g) {
        const double w = lo + step * g;
        const double e = project_onto(x, u, w, with_cos).explained;
        if (e > best) {
            best = e;
            best_w = w;
        }
    }
    double a = std::max(lo, best_w - step);
    double b = std::min(hi, best_w + step);
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - inv_phi * (b - a);
    double d = a + inv_phi * (b - a);
    double fc = project_onto(x, u, c, with_cos).explained;
    double fd = project_onto(x, u, d, with_cos).explained;
    for (int it = 0; it < 200 && (b - a) > 1e-15 * std::max(1.0, std::abs(b)); ++it) {
        if (fc > fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = project_onto(x, u, c, with_cos).explained;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = project_onto(x, u, d, with_cos).explained;
        }
    }
    const double w = 0.5 * (a + b);
    return project_onto(x, u, w, with_cos).explained >= best ? w : best_w;
}

// Solves the small symmetric system in place (Gaussian elimination with
// partial pivoting). Returns false when singular.
template <std::size_t N>
bool solve_small(std::array<std::array<double, N>, N> a, std::array<double, N>& b) {
    for (std::size_t col = 0; col < N; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < N; ++r)
            if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
        if (std::abs(a[piv][col]) < 1e-300) return false;
        std::swap(a[piv], a[col]);
        std::swap(b[piv], b[col]);
        for (std::size_t r = col + 1; r < N; ++r) {
            const double f = a[r][col] / a[col][col];
            for (std::size_t c = col; c < N; ++c) a[r][c] -= f * a[col][c];
            b[r] -= f * b[col];
        }
    }
    for (std::size_t i = N; i-- > 0;) {
        for (std::size_t c = i + 1; c < N; ++c) b[i] -= a[i][c] * b[c];
        b[i] /= a[i][i];
    }
    return true;
}

// Levenberg-Marquardt on c sin(w u + p) (N = 3) or c sin(w u) (N = 2).
template <std::size_t N>
int levenberg_marquardt(std::span<const double> x, std::span<const double> u, std::array<double, N>& params) {
    auto model = [&](const std::array<double, N>& p, std::size_t i) {
        const double phase = N == 3 ? p[N - 1] : 0.0;
        return p[0] * std::sin(p[1] * u[i] + phase);
    };
    auto sse_of = [&](const std::array<double, N>& p) {
        double s = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double r = x[i] - model(p, i);
            s += r * r;
        }
        return s;
    };

    constexpr int max_iter = 200;
    double lambda = 1e-3;
    double sse = sse_of(params);
    for (int iter = 1; iter <= max_iter; ++iter) {
        std::array<std::array<double, N>, N> jtj{};
        std::array<double, N> jtr{};
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double phase = N == 3 ? params[N - 1] : 0.0;
            const double arg = params[1] * u[i] + phase;
            const double s = std::sin(arg);
            const double c = std::cos(arg);
            std::array<double, N> j{};
            j[0] = s;
            j[1] = params[0] * u[i] * c;
            if constexpr (N == 3) j[2] = params[0] * c;
            const double r = x[i] - params[0] * s;
            for (std::size_t a = 0; a < N; ++a) {
                jtr[a] += j[a] * r;
                for (std::size_t b = 0; b < N; ++b) jtj[a][b] += j[a] * j[b];
            }
        }
        bool improved = false;
        while (lambda < 1e16) {
            auto damped = jtj;
            for (std::size_t a = 0; a < N; ++a) damped[a][a] += lambda * std::max(jtj[a][a], 1e-300);
            auto step = jtr;
            if (!solve_small<N>(damped, step)) {
                lambda *= 10.0;
                continue;
            }
            auto trial = params;
            for (std::size_t a = 0; a < N; ++a) trial[a] += step[a];
            const double trial_sse = sse_of(trial);
            if (trial_sse <= sse) {
                bool tiny = true;
                for (std::size_t a = 0; a < N; ++a)
                    if (std::abs(step[a]) > 1e-13 * (std::abs(params[a]) + 1e-13)) tiny = false;
                const double gain = sse - trial_sse;
                params = trial;
                sse = trial_sse;
                lambda = std::max(lambda * 0.1, 1e-12);
                improved = true;
                if (tiny || gain <= 1e-15 * sse) return iter;
                break;
            }
            lambda *= 10.0;
        }
        if (!improved) return iter;  // no descent direction left: at the minimum
    }
    throw Error(ErrorKind::numerical, "fit_sinusoid: Levenberg-Marquardt did not converge in " +
                                          std::to_string(max_iter) + " iterations");
}

}  // namespace

SinusoidFit fit_sinusoid(std::span<const double> series, PhaseMode mode) {
    const std::size_t n = series.size();
    if (n < 8) throw Error(ErrorKind::invalid_argument, "fit_sinusoid: series too short");
    for (double v : series)
        if (!std::isfinite(v)) throw Error(ErrorKind::invalid_data, "fit_sinusoid: non-finite sample");

    const auto power = power_spectrum(series);
    std::size_t peak = 1;
    double total = 0.0;
    for (std::size_t kbin = 1; kbin < power.size(); ++kbin) {
        total += power[kbin];
        if (power[kbin] > power[peak]) peak = kbin;
    }
    const double mean_power = total / static_cast<double>(power.size() - 1);
    if (!(total > 0.0) || power[peak] <= mean_power * (1.0 + 1e-9))
        throw Error(ErrorKind::invalid_data, "fit_sinusoid: flat spectrum, no dominant frequency");
    if (peak < 3)
        throw Error(ErrorKind::invalid_argument, "fit_sinusoid: series shorter than 3 periods of its dominant frequency");

    const double bin = 2.0 * std::numbers::pi / static_cast<double>(n);
    const double lo = bin * (static_cast<double>(peak) - 1.0);
    const double hi = bin * std::min(static_cast<double>(peak) + 1.0, static_cast<double>(n) / 2.0);

    // Centered time for the phase-free model keeps the Jacobian well scaled.
    const bool free_phase = mode == PhaseMode::free;
    const double t_mid = free_phase ? 0.5 * static_cast<double>(n - 1) : 0.0;
    std::vector<double> u(n);
    for (std::size_t i = 0; i < n; ++i) u[i] = static_cast<double>(i) - t_mid;

    const double w0 = solve_frequency(series, u, lo, hi, free_phase);
    const LinearFit lin = project_onto(series, u, w0, free_phase);

    SinusoidFit fit;
    if (free_phase) {
        std::array<double, 3> p{std::hypot(lin.a, lin.b), w0, std::atan2(lin.b, lin.a)};
        fit.iterations = levenberg_marquardt<3>(series, u, p);
        fit.amplitude = p[0];
        fit.omega = p[1];
        fit.phase = p[2] - p[1] * t_mid;
    } else {
        std::array<double, 2> p{lin.a, w0};
        fit.iterations = levenberg_marquardt<2>(series, u, p);
        fit.amplitude = p[0];
        fit.omega = p[1];
        fit.phase = 0.0;
    }
    if (fit.amplitude < 0.0) {
        fit.amplitude = -fit.amplitude;
        fit.phase += std::numbers::pi;
    }
    fit.phase = wrap_phase(fit.phase);
    if (!(fit.omega > 0.0)) throw Error(ErrorKind::numerical, "fit_sinusoid: non-positive frequency");

    double mean = 0.0;
    for (double v : series) mean += v;
    mean /= static_cast<double>(n);
    double sse = 0.0, sst = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = series[i] - fit(static_cast<double>(i));
        sse += r * r;
        sst += (series[i] - mean) * (series[i] - mean);
    }
    fit.r2 = sst > 0.0 ? std::clamp(1.0 - sse / sst, 0.0, 1.0) : 0.0;
    return fit;
}

// --- normative model ------------------------------------------------------

std::string_view to_string(NormativePooling pooling) {
    return pooling == NormativePooling::time_normalized ? "time_normalized" : "raw_concat";
}

std::string_view to_string(PhaseMode mode) { return mode == PhaseMode::free ? "free" : "none"; }

std::vector<double> NormativeModel::fit_r2() const {
    std::vector<double> r;
    for (const auto& s : sinusoids) r.push_back(s.r2);
    return r;
}

Matrix time_normalize(const JointTrajectory& traj, std::size_t samples_per_cycle) {
    if (traj.cycle_starts.size() < 2)
        throw Error(ErrorKind::invalid_data, "time_normalize: trajectory carries fewer than 2 cycle bounds");
    if (samples_per_cycle < 2) throw Error(ErrorKind::invalid_argument, "time_normalize: need >= 2 samples per cycle");
    const std::size_t cycles = traj.cycle_starts.size() - 1;
    const std::size_t d = traj.samples.cols();
    Matrix out(cycles * samples_per_cycle, d);
    for (std::size_t c = 0; c < cycles; ++c) {
        const double b = static_cast<double>(traj.cycle_starts[c]);
        const double e = static_cast<double>(traj.cycle_starts[c + 1]);
        if (!(e > b) || traj.cycle_starts[c + 1] >= traj.length() + 1)
            throw Error(ErrorKind::invalid_data, "time_normalize: bad cycle bounds");
        for (std::size_t j = 0; j < samples_per_cycle; ++j) {
            double pos = b + (e - b) * static_cast<double>(j) / static_cast<double>(samples_per_cycle - 1);
            pos = std::min(pos, static_cast<double>(traj.length() - 1));
            const auto i0 = static_cast<std::size_t>(std::floor(pos));
            const std::size_t i1 = std::min(i0 + 1, traj.length() - 1);
            const double f = pos - static_cast<double>(i0);
            for (std::size_t k = 0; k < d; ++k)
                out(c * samples_per_cycle + j, k) = (1.0 - f) * traj.samples(i0, k) + f * traj.samples(i1, k);
        }
    }
    return out;
}

NormativeModel fit_normative_model(std::span<const JointTrajectory> subjects, const NormativeOptions& options) {
    if (subjects.empty()) throw Error(ErrorKind::invalid_argument, "normative model: empty dataset");

    std::vector<Matrix> parts;
    std::size_t total_rows = 0;
    double cycle_samples_sum = 0.0;
    std::size_t cycle_count = 0;
    for (const auto& s : subjects) {
        if (s.samples.cols() != kChannelCount)
            throw Error(ErrorKind::invalid_argument, "normative model: subject trajectory must have 45 columns");
        Matrix m = options.pooling == NormativePooling::time_normalized ? time_normalize(s, options.cycle_samples)
                                                                        : s.samples;
        if (options.pooling == NormativePooling::raw_concat && s.cycle_starts.size() >= 2) {
            cycle_samples_sum += static_cast<double>(s.cycle_starts.back() - s.cycle_starts.front());
            cycle_count += s.cycle_starts.size() - 1;
        }
        // Center per subject so inter-subject posture differences do not
        // become components.
        std::vector<double> mean(kChannelCount, 0.0);
        for (std::size_t r = 0; r < m.rows(); ++r)
            for (std::size_t c = 0; c < kChannelCount; ++c) mean[c] += m(r, c);
        for (double& v : mean) v /= static_cast<double>(m.rows());
        for (std::size_t r = 0; r < m.rows(); ++r)
            for (std::size_t c = 0; c < kChannelCount; ++c) m(r, c) -= mean[c];
        total_rows += m.rows();
        parts.push_back(std::move(m));
    }
    Matrix pooled(total_rows, kChannelCount);
    std::size_t at = 0;
    for (const auto& p : parts) {
        std::copy(p.data(), p.data() + p.values().size(), pooled.row(at).data());
        at += p.rows();
    }

    const Pca pca = fit_pca(pooled);
    std::size_t effective = 0;
    for (double r : pca.explained_variance_ratio)
        if (r > 1e-12) ++effective;
    if (effective < kNormativeComponents)
        throw Error(ErrorKind::invalid_data, "normative model: fewer than 4 components with nonzero variance (" +
                                                 std::to_string(effective) + ")");

    NormativeModel nm;
    nm.loadings = leading_rows(pca.loadings, kNormativeComponents);
    nm.explained_variance_ratio.assign(pca.explained_variance_ratio.begin(),
                                       pca.explained_variance_ratio.begin() + kNormativeComponents);
    nm.pooling = options.pooling;
    nm.phase_mode = options.phase_mode;
    nm.n_subjects = subjects.size();
    if (options.pooling == NormativePooling::time_normalized)
        nm.samples_per_cycle = static_cast<double>(options.cycle_samples);
    else if (cycle_count > 0)
        nm.samples_per_cycle = cycle_samples_sum / static_cast<double>(cycle_count);

    const Matrix scores = project_scores(pooled, pca.mean, nm.loadings, kNormativeComponents);
    std::vector<double> series(scores.rows());
    for (std::size_t i = 0; i < kNormativeComponents; ++i) {
        for (std::size_t r = 0; r < scores.rows(); ++r) series[r] = scores(r, i);
        nm.sinusoids.push_back(fit_sinusoid(series, options.phase_mode));
    }
    return nm;
}

Matrix reconstruct_normative(const NormativeModel& model, std::size_t t_length) {
    if (t_length < 1) throw Error(ErrorKind::invalid_argument, "reconstruct_normative: t_length must be >= 1");
    const auto& k = kernels::active();
    Matrix n(t_length, model.loadings.cols());
    for (std::size_t r = 0; r < t_length; ++r) {
        const double t = static_cast<double>(r + 1);
        for (std::size_t i = 0; i < model.sinusoids.size(); ++i)
            k.axpy(model.sinusoids[i](t), model.loadings.row(i).data(), n.row(r).data(), n.cols());
    }
    return n;
}

NormativeModel align_cadence(const NormativeModel& model, double samples_per_cycle) {
    if (!(samples_per_cycle > 0.0) || !(model.samples_per_cycle > 0.0))
        throw Error(ErrorKind::invalid_argument, "align_cadence: both cycle lengths must be known and positive");
    NormativeModel out = model;
    const double ratio = model.samples_per_cycle / samples_per_cycle;
    for (auto& s : out.sinusoids) s.omega *= ratio;
    out.samples_per_cycle = samples_per_cycle;
    return out;
}

}  // namespace scomo
