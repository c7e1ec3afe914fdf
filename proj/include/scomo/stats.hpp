#pragma once

// Session-trend statistics: a Gaussian random-intercept mixed model fitted
// by maximum likelihood, and summaries of repeated SCoMo selections.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "scomo/synthesis.hpp"

namespace scomo {

struct MixedModelFit {
    double fixed_intercept = 0.0;
    double fixed_slope = 0.0;
    std::vector<std::string> groups;
    std::vector<double> random_intercepts;  // BLUPs, aligned with `groups`
    double sigma_between = 0.0;             // SD of the random intercept
    double sigma_within = 0.0;              // residual SD
    double variance_ratio = 0.0;            // sigma_between^2 / sigma_within^2
    double slope_se = 0.0;
    double t_stat = 0.0;
    double p_value = 1.0;
    double degrees_of_freedom = 0.0;
    double log_likelihood = 0.0;
    std::size_t n_observations = 0;
    int iterations = 0;
    bool converged = false;
};

inline constexpr const char* kMixedModelMethod = "ML";
inline constexpr const char* kPValueMethod = "two-sided Student t, df = N - 2 - (groups - 1)";

/// y = b0 + b1 * session + u_group + e with u ~ N(0, sb^2), e ~ N(0, sw^2).
/// The likelihood is profiled over the variance ratio, which is searched on
/// a 64-point grid and refined by golden-section search.
class RandomInterceptModel {
public:
    RandomInterceptModel(std::span<const double> y, std::span<const double> session,
                         std::span<const std::string> group);

    static constexpr int kGridPoints = 64;
    /// Upper end of the searched ratio range, in rho = ratio / (1 + ratio).
    static constexpr double kMaxRho = 1.0 - 1e-10;

    static double ratio_from_rho(double rho) { return rho / (1.0 - rho); }

    double profiled_log_likelihood(double variance_ratio) const;
    MixedModelFit fit() const;

private:
    struct Group {
        std::string label;
        std::vector<double> y;
        std::vector<double> x;
    };
    struct Gls {
        double b0, b1, sigma2, inv11, loglik, dloglik;
        std::vector<double> mean_residual;
    };
    Gls solve(double variance_ratio) const;

    std::vector<Group> groups_;
    std::size_t n_ = 0;
    double y_offset_ = 0.0;
};

MixedModelFit fit_random_intercept(std::span<const double> y, std::span<const double> session,
                                   std::span<const std::string> participant);

struct SelectionSummary {
    double mean_scomo = 0.0;
    double sd_scomo = 0.0;  // sample SD, n - 1 denominator
    std::size_t n_repeats = 0;
    ViewingAngle view;
};

SelectionSummary summarize_selections(std::span<const double> selections, ViewingAngle view);

}  // namespace scomo
