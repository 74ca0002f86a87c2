#pragma once

#include "dg_field.hpp"
#include "ks_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ksddg {

struct LimiterReport {
    std::vector<double> theta;    ///< per-element scaling factor in [0,1]
    int limited = 0;              ///< elements with theta < 1
    int flattened = 0;            ///< elements forced to theta = 0 by a vanishing denominator
    double max_violation = 0.0;   ///< largest pre-limit nodal excursion past a bound
    double min_average = 0.0;     ///< smallest pre-limit cell average
    double max_average = 0.0;     ///< largest pre-limit cell average

    [[nodiscard]] double theta_min() const
    {
        return theta.empty() ? 1.0 : *std::min_element(theta.begin(), theta.end());
    }
};

/// Scaling limiter u -> avg + theta (u - avg) per element, theta chosen from the nodal
/// extrema so that every Gauss–Lobatto value lands in [lower, upper]. Cell averages
/// must already lie inside the bounds (strictly, when `strict` is set).
inline std::pair<DGField, LimiterReport> scaling_limiter(
    const DGField& field, double lower, double upper, bool strict, const char* who)
{
    constexpr double tiny = 1e-300;
    const auto& sp = field.space();
    const int n = sp.nodes_per_element();
    DGField out = field;
    LimiterReport rep;
    rep.theta.assign(sp.num_elements(), 1.0);
    rep.min_average = std::numeric_limits<double>::infinity();
    rep.max_average = -std::numeric_limits<double>::infinity();

    for (int e = 0; e < sp.num_elements(); ++e) {
        const double avg = cell_average(field, e);
        rep.min_average = std::min(rep.min_average, avg);
        rep.max_average = std::max(rep.max_average, avg);
        const bool inside = strict ? (avg > lower && avg < upper) : (avg >= lower && avg <= upper);
        if (!inside || !std::isfinite(avg))
            throw std::domain_error(std::string(who) + ": cell average " + std::to_string(avg)
                + " outside the admissible range in element " + std::to_string(e));

        const auto w = field.element(e);
        const auto [lo_it, hi_it] = std::minmax_element(w.begin(), w.end());
        const double lo = *lo_it;
        const double hi = *hi_it;
        rep.max_violation = std::max({rep.max_violation, lower - lo, hi - upper});

        double theta = 1.0;
        bool flatten = false;
        auto consider = [&](double num, double den) {
            if (den == 0.0)
                return; // constant element
            if (den < tiny) {
                flatten = true;
                return;
            }
            theta = std::min(theta, num / den);
        };
        consider(avg - lower, avg - lo);
        if (std::isfinite(upper))
            consider(upper - avg, hi - avg);
        if (flatten && (lo < lower || hi > upper)) {
            theta = 0.0;
            ++rep.flattened;
        }
        theta = std::clamp(theta, 0.0, 1.0);
        rep.theta[e] = theta;
        if (theta < 1.0) {
            ++rep.limited;
            auto o = out.element(e);
            for (int q = 0; q < n; ++q)
                o[q] = std::clamp(avg + theta * (w[q] - avg), lower, upper);
        }
    }
    return {std::move(out), std::move(rep)};
}

/// Density limiter: [0,1] for the saturated model, [0,inf) for the linear one.
inline std::pair<DGField, LimiterReport> limit_u(const DGField& u, MobilityModel m = MobilityModel::Saturated)
{
    const double upper = m == MobilityModel::Saturated ? 1.0 : std::numeric_limits<double>::infinity();
    return scaling_limiter(u, 0.0, upper, true, "limit_u");
}

/// Concentration limiter: c >= 0.
inline std::pair<DGField, LimiterReport> limit_c(const DGField& c)
{
    return scaling_limiter(c, 0.0, std::numeric_limits<double>::infinity(), false, "limit_c");
}

} // namespace ksddg
