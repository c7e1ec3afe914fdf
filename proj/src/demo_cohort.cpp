#include "scomo/demo_cohort.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include "scomo/error.hpp"
#include "scomo/pipeline.hpp"
#include "scomo/serialization.hpp"
#include "scomo/session.hpp"
#include "scomo/synthesis.hpp"

namespace scomo {

namespace fs = std::filesystem;

namespace {

std::string participant_name(std::size_t p) {
    char buf[8];
    std::snprintf(buf, sizeof buf, "P%02zu", p);
    return buf;
}

int round10(double ms) { return 10 * static_cast<int>(std::lround(ms / 10.0)); }

void write_trial_files(const fs::path& stem, const SyntheticTrial& t) {
    std::ostringstream traj, grf_r, grf_c;
    write_trajectory(traj, t.trajectory);
    write_grf(grf_r, t.grf_robotic);
    write_grf(grf_c, t.grf_contralateral);
    write_file_atomic(stem.string() + ".traj.csv", traj.str());
    write_file_atomic(stem.string() + ".grf_robotic.csv", grf_r.str());
    write_file_atomic(stem.string() + ".grf_contralateral.csv", grf_c.str());
}

}  // namespace

double demo_level(std::size_t p, int n) {
    if (p <= 1) return 0.0;
    const double l0 = 0.5 + 0.06 * static_cast<double>(p);
    const double lambda = 3.0 + 0.5 * static_cast<double>(p % 4);
    return l0 * std::exp(-(n - 1) / lambda) + 0.1;
}

WalkerParams demo_walker(std::size_t p, int n, std::uint64_t seed) {
    WalkerParams w;
    w.n_cycles = 8;
    w.seed = seed;
    if (p <= 1) return w;  // symmetric, noise-free
    const double L = demo_level(p, n);
    w.stride_ms = 1100 + round10(200.0 * L);
    w.robot_step_ms = w.stride_ms / 2 + round10(80.0 * L);
    w.stance_ms = round10(0.6 * w.stride_ms);
    w.robot_step_m = 0.5 - 0.2 * L;
    w.ctl_step_m = 0.5 + 0.05 * L;
    w.trunk_lean_deg = 5.0 + 10.0 * L;
    w.trunk_sway_m = 0.03 + 0.05 * L;
    w.noise_m = 0.002;
    w.grf_noise_n = 3.0;
    w.grf_offset_n = 10.0;
    w.robotic_side = p % 2 ? BodySide::right : BodySide::left;
    return w;
}

DemoCohort write_demo_cohort(const DemoOptions& o) {
    if (o.dir.empty()) throw Error(ErrorKind::invalid_argument, "demo: output directory required");
    if (o.participants < 1 || o.participants > 99) throw Error(ErrorKind::invalid_argument, "demo: 1-99 participants");
    if (o.normative_walkers < kNormativeComponents)
        throw Error(ErrorKind::invalid_argument, "demo: need at least 4 normative walkers");
    const fs::path data = o.dir / "data";
    fs::create_directories(data / "normative");
    fs::create_directories(data / "captures");
    std::mt19937_64 rng(o.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    for (std::size_t i = 1; i <= o.normative_walkers; ++i) {
        WalkerParams w;
        w.stride_ms = round10(1000.0 + 300.0 * unit(rng));
        w.robot_step_ms = w.stride_ms / 2;
        w.stance_ms = round10(0.6 * w.stride_ms);
        w.robot_step_m = w.ctl_step_m = 0.55 + 0.2 * unit(rng);
        w.trunk_lean_deg = 3.0 + 4.0 * unit(rng);
        w.trunk_sway_m = 0.02 + 0.02 * unit(rng);
        w.noise_m = 0.001;
        w.n_cycles = 4;
        w.seed = rng();
        const auto t = generate_walker(w);
        char name[16];
        std::snprintf(name, sizeof name, "N%02zu.csv", i);
        std::ostringstream out;
        write_trajectory(out, t.trajectory);
        write_file_atomic(data / "normative" / name, out.str());
    }

    std::ostringstream trials, selections, confidence;
    trials << "participant_id,day,session,trial,speed_mps,handrail_free,speed_request,robotic_side,trajectory,"
              "grf_robotic,grf_contralateral\n";
    selections << "participant_id,day,session,view,repeat,alpha1\n";
    confidence << "participant_id,day,rating,cues\n";
    const double view_bias[] = {0.0, -0.3, 0.2};

    DemoCohort cohort;
    for (std::size_t p = 1; p <= o.participants; ++p) {
        const auto pid = participant_name(p);
        int speed = kDay1StartSpeedSteps;
        for (int day = 1; day <= kDays; ++day) {
            for (int idx = 1; idx <= kSessionsPerDay; ++idx) {
                const int n = session_number(day, idx);
                const double L = demo_level(p, n);
                const auto sid = session_id(pid, day, idx);
                const auto w = demo_walker(p, n, rng());
                std::vector<Trial> done;
                for (int k = 1; k <= static_cast<int>(kTrialsPerSession); ++k) {
                    const bool free = p == 1 || unit(rng) > 0.7 * L;
                    done.push_back({k, speed, free});
                    trials << pid << ',' << day << ',' << idx << ',' << k << ',' << format_number(speed_mps(speed), 2)
                           << ',' << (free ? "true" : "false") << ',';
                    if (day == 1) {
                        if (k % kTrialsPerBlock == 0 && speed < kDay1MaxSpeedSteps) ++speed;
                    } else if (k % kTrialsPerBlock == 0) {
                        const std::span<const Trial> block(done.end() - kTrialsPerBlock, done.end());
                        const auto n_free = std::count_if(block.begin(), block.end(), [](const Trial& t) {
                            return t.handrail_free;
                        });
                        const int direction = n_free >= 2 ? 1 : (n_free == 0 ? -1 : 0);
                        speed = decide_speed_change(day, direction, block, speed).speed_after;
                        trials << direction;
                    }
                    trials << ',' << (w.robotic_side == BodySide::left ? "left" : "right") << ',';
                    if (k == static_cast<int>(kTrialsPerSession)) {
                        const auto stem = fs::path("captures") / sid;
                        write_trial_files(data / stem, generate_walker(w));
                        trials << stem.generic_string() << ".traj.csv," << stem.generic_string()
                               << ".grf_robotic.csv," << stem.generic_string() << ".grf_contralateral.csv";
                    } else {
                        trials << ",,";
                    }
                    trials << '\n';
                }
                for (std::size_t v = 0; v < kAllViews.size(); ++v)
                    for (int r = 1; r <= static_cast<int>(kRepeatsPerView); ++r) {
                        const double a = std::clamp(4.4 - 6.0 * L + view_bias[v] + 0.3 * gauss(rng), -4.4, 4.4);
                        selections << pid << ',' << day << ',' << idx << ',' << to_string(kAllViews[v]) << ',' << r
                                   << ',' << format_number(a, 4) << '\n';
                    }
                ++cohort.sessions;
            }
            const double L = demo_level(p, session_number(day, kSessionsPerDay));
            const int rating = std::clamp(static_cast<int>(std::lround(9.0 - 6.0 * L + gauss(rng))), 1, 10);
            confidence << pid << ',' << day << ',' << rating << ',' << (L > 0.4 ? "trunk;step length" : "step length")
                       << '\n';
        }
    }
    write_file_atomic(data / "trials.csv", trials.str());
    write_file_atomic(data / "selections.csv", selections.str());
    write_file_atomic(data / "confidence.csv", confidence.str());

    PipelineConfig cfg;
    cfg.trials = "data/trials.csv";
    cfg.normative_dir = "data/normative";
    cfg.selections = "data/selections.csv";
    cfg.confidence = "data/confidence.csv";
    cfg.output_dir = "out";
    cfg.seed = o.seed;
    cohort.config = o.dir / "pipeline.cfg";
    cohort.output_dir = o.dir / "out";
    write_file_atomic(cohort.config, format_config(cfg));
    return cohort;
}

}  // namespace scomo
