#include "scomo/stats.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>

#include "scomo/error.hpp"

namespace scomo {

RandomInterceptModel::RandomInterceptModel(std::span<const double> y, std::span<const double> session,
                                           std::span<const std::string> group) {
    if (y.size() != session.size() || y.size() != group.size())
        throw Error(ErrorKind::invalid_argument, "mixed model: y, session and group lengths differ");
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (!std::isfinite(y[i]) || !std::isfinite(session[i]))
            throw Error(ErrorKind::invalid_data, "mixed model: non-finite observation");
        auto [it, inserted] = index.try_emplace(group[i], groups_.size());
        if (inserted) groups_.push_back({group[i], {}, {}});
        groups_[it->second].y.push_back(y[i]);
        groups_[it->second].x.push_back(session[i]);
    }
    n_ = y.size();
    // Work on centered responses; the offset returns in the intercept.
    for (auto& g : groups_)
        for (double v : g.y) y_offset_ += v;
    y_offset_ /= static_cast<double>(std::max<std::size_t>(n_, 1));
    for (auto& g : groups_)
        for (double& v : g.y) v -= y_offset_;
    if (groups_.size() < 2) throw Error(ErrorKind::invalid_argument, "mixed model: need at least 2 groups");
    for (const auto& g : groups_)
        if (g.y.size() < 3)
            throw Error(ErrorKind::invalid_argument, "mixed model: group '" + g.label + "' has fewer than 3 observations");
    const double x0 = groups_.front().x.front();
    bool varies = false;
    for (const auto& g : groups_)
        for (double x : g.x) varies = varies || x != x0;
    if (!varies) throw Error(ErrorKind::invalid_data, "mixed model: singular design (constant session covariate)");
}

RandomInterceptModel::Gls RandomInterceptModel::solve(double lambda) const {
    // V_i = sigma2 (I + lambda J), so V_i^-1 = (I - J/n_i) / sigma2 + (J/n_i) / (sigma2 (1 + n_i lambda)).
    // Splitting every quadratic form into within-group and group-mean parts
    // avoids cancellation when lambda is large.
    double a00 = 0, a01 = 0, a11 = 0, r0 = 0, r1 = 0;
    for (const auto& g : groups_) {
        const auto ni = static_cast<double>(g.y.size());
        const double shrink = 1.0 / (1.0 + ni * lambda);
        double mx = 0, my = 0;
        for (std::size_t j = 0; j < g.y.size(); ++j) {
            mx += g.x[j];
            my += g.y[j];
        }
        mx /= ni;
        my /= ni;
        double sxx = 0, sxy = 0;
        for (std::size_t j = 0; j < g.y.size(); ++j) {
            sxx += (g.x[j] - mx) * (g.x[j] - mx);
            sxy += (g.x[j] - mx) * (g.y[j] - my);
        }
        a00 += ni * shrink;
        a01 += ni * mx * shrink;
        a11 += sxx + ni * mx * mx * shrink;
        r0 += ni * my * shrink;
        r1 += sxy + ni * mx * my * shrink;
    }
    const double det = a00 * a11 - a01 * a01;
    if (!(std::abs(det) > 1e-14 * std::abs(a00 * a11)))
        throw Error(ErrorKind::numerical, "mixed model: singular design");

    Gls out;
    out.b0 = (a11 * r0 - a01 * r1) / det;
    out.b1 = (a00 * r1 - a01 * r0) / det;
    out.inv11 = a00 / det;

    double quad = 0.0, logdet = 0.0, dquad = 0.0, dlogdet = 0.0;
    out.mean_residual.reserve(groups_.size());
    for (const auto& g : groups_) {
        const auto ni = static_cast<double>(g.y.size());
        double mean = 0.0;
        for (std::size_t j = 0; j < g.y.size(); ++j) mean += g.y[j] - out.b0 - out.b1 * g.x[j];
        mean /= ni;
        double within = 0.0;
        for (std::size_t j = 0; j < g.y.size(); ++j) {
            const double d = g.y[j] - out.b0 - out.b1 * g.x[j] - mean;
            within += d * d;
        }
        const double shrink = 1.0 / (1.0 + ni * lambda);
        quad += within + ni * mean * mean * shrink;
        logdet += std::log1p(ni * lambda);
        // Envelope theorem: beta is optimal, so only the explicit lambda terms move.
        dquad -= ni * ni * mean * mean * shrink * shrink;
        dlogdet += ni * shrink;
        out.mean_residual.push_back(mean);
    }
    const auto n = static_cast<double>(n_);
    out.sigma2 = std::max(quad / n, std::numeric_limits<double>::min());
    out.loglik = -0.5 * n * (std::log(2.0 * std::numbers::pi * out.sigma2) + 1.0) - 0.5 * logdet;
    out.dloglik = quad > 0.0 ? -0.5 * n * dquad / quad - 0.5 * dlogdet : 0.0;
    return out;
}

double RandomInterceptModel::profiled_log_likelihood(double variance_ratio) const {
    return solve(variance_ratio).loglik;
}

MixedModelFit RandomInterceptModel::fit() const {
    auto objective = [&](double rho) { return solve(ratio_from_rho(rho)).loglik; };

    int evaluations = 0;
    double best_rho = 0.0;
    double best = -std::numeric_limits<double>::infinity();
    int best_index = 0;
    for (int i = 0; i < kGridPoints; ++i) {
        const double rho = kMaxRho * i / (kGridPoints - 1);
        const double v = objective(rho);
        ++evaluations;
        if (v > best) {
            best = v;
            best_rho = rho;
            best_index = i;
        }
    }
    const double step = kMaxRho / (kGridPoints - 1);
    double a = std::max(0.0, step * (best_index - 1));
    double b = std::min(kMaxRho, step * (best_index + 1));
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - inv_phi * (b - a);
    double d = a + inv_phi * (b - a);
    double fc = objective(c), fd = objective(d);
    evaluations += 2;
    bool converged = false;
    for (int it = 0; it < 200; ++it) {
        if (b - a <= 1e-13) {
            converged = true;
            break;
        }
        if (fc > fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = objective(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = objective(d);
        }
        ++evaluations;
    }
    if (!converged) throw Error(ErrorKind::numerical, "mixed model: golden-section search did not converge");
    for (double rho : {c, d, 0.5 * (a + b)}) {
        const double v = objective(rho);
        if (v > best) {
            best = v;
            best_rho = rho;
        }
    }

    // The likelihood is flat at its maximum, which pins rho only to about
    // sqrt(eps); its derivative crosses zero cleanly, so bisect on that.
    auto slope = [&](double rho) { return solve(ratio_from_rho(rho)).dloglik; };
    double lo = std::max(0.0, best_rho - step), hi = std::min(kMaxRho, best_rho + step);
    if (slope(lo) > 0.0 && slope(hi) < 0.0) {
        for (int it = 0; it < 200 && hi - lo > 4.0 * std::numeric_limits<double>::epsilon() * hi; ++it) {
            const double mid = 0.5 * (lo + hi);
            (slope(mid) > 0.0 ? lo : hi) = mid;
            ++evaluations;
        }
        const double rho = 0.5 * (lo + hi);
        const double v = objective(rho);
        if (v >= best - 1e-12 * std::abs(best)) {
            best = std::max(best, v);
            best_rho = rho;
        }
    }

    const double lambda = ratio_from_rho(best_rho);
    const Gls g = solve(lambda);
    MixedModelFit f;
    f.fixed_intercept = g.b0 + y_offset_;
    f.fixed_slope = g.b1;
    f.variance_ratio = lambda;
    f.sigma_within = std::sqrt(g.sigma2);
    f.sigma_between = std::sqrt(lambda * g.sigma2);
    f.slope_se = std::sqrt(g.sigma2 * g.inv11);
    f.log_likelihood = g.loglik;
    f.n_observations = n_;
    f.iterations = evaluations;
    f.converged = true;
    for (std::size_t i = 0; i < groups_.size(); ++i) {
        const auto ni = static_cast<double>(groups_[i].y.size());
        f.groups.push_back(groups_[i].label);
        f.random_intercepts.push_back(ni * lambda / (1.0 + ni * lambda) * g.mean_residual[i]);
    }
    f.degrees_of_freedom = static_cast<double>(n_) - 2.0 - static_cast<double>(groups_.size() - 1);
    if (f.degrees_of_freedom < 1.0)
        throw Error(ErrorKind::invalid_argument, "mixed model: no residual degrees of freedom");
    f.t_stat = f.slope_se > 0.0 ? f.fixed_slope / f.slope_se
                                : std::copysign(std::numeric_limits<double>::infinity(), f.fixed_slope);
    if (std::isinf(f.t_stat)) {
        f.p_value = 0.0;
    } else {
        const boost::math::students_t dist(f.degrees_of_freedom);
        f.p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(f.t_stat)));
    }
    return f;
}

MixedModelFit fit_random_intercept(std::span<const double> y, std::span<const double> session,
                                   std::span<const std::string> participant) {
    return RandomInterceptModel(y, session, participant).fit();
}

SelectionSummary summarize_selections(std::span<const double> selections, ViewingAngle view) {
    if (selections.size() < 2)
        throw Error(ErrorKind::invalid_argument, "summarize_selections: insufficient repeats (need at least 2)");
    SelectionSummary s;
    s.view = view;
    s.n_repeats = selections.size();
    double mean = 0.0;
    for (double v : selections) mean += v;
    mean /= static_cast<double>(selections.size());
    double ss = 0.0;
    for (double v : selections) ss += (v - mean) * (v - mean);
    s.mean_scomo = mean;
    s.sd_scomo = std::sqrt(ss / static_cast<double>(selections.size() - 1));
    return s;
}

}  // namespace scomo
