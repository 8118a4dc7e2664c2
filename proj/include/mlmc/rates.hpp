#pragma once

// Log-linear fits of per-level decay/growth rates and the bias test built on
// them.

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mlmc/error.hpp"

namespace mlmc {

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
};

/// Ordinary least squares y = intercept + slope * x.
inline LinearFit least_squares(std::span<const double> x, std::span<const double> y)
{
    if (x.size() != y.size() || x.size() < 2)
        throw InsufficientLevels("least_squares: need at least two points");
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
    }
    const double mx = sx / n;
    const double my = sy / n;
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (!(sxx > 0.0))
        throw InsufficientLevels("least_squares: abscissae are all equal");
    const double slope = sxy / sxx;
    return {slope, my - slope * mx};
}

/// Fits log2 |values[l]| = intercept + slope * l over levels >= first_level,
/// skipping zero or non-finite entries. Empty when fewer than two usable
/// levels remain.
inline std::optional<LinearFit> fit_log2_by_level(std::span<const double> values, int first_level)
{
    std::vector<double> x, y;
    for (std::size_t l = static_cast<std::size_t>(std::max(first_level, 0)); l < values.size(); ++l) {
        const double v = std::abs(values[l]);
        if (v > 0.0 && std::isfinite(v)) {
            x.push_back(static_cast<double>(l));
            y.push_back(std::log2(v));
        }
    }
    if (x.size() < 2)
        return std::nullopt;
    return least_squares(x, y);
}

/// Fitted constants of |E[Y_l]| ~ c1 2^{-alpha l}, V_l ~ c2 2^{-beta l},
/// C_l ~ c3 2^{gamma l}.
struct RateEstimates {
    double alpha = 0.0;
    double beta = 0.0;
    double gamma = 0.0;
    double c1 = 0.0;
    double c2 = 0.0;
    double c3 = 0.0;
};

/// Fits all three rates. Levels below first_level are ignored, as are zero
/// means or variances. Throws InsufficientLevels when any quantity has fewer
/// than two usable levels.
inline RateEstimates estimate_rates(std::span<const double> means, std::span<const double> variances,
                                    std::span<const double> costs, int first_level = 1)
{
    if (means.size() != variances.size() || means.size() != costs.size())
        throw BadInput("estimate_rates: per-level inputs must have equal length");
    const auto a = fit_log2_by_level(means, first_level);
    const auto b = fit_log2_by_level(variances, first_level);
    const auto g = fit_log2_by_level(costs, first_level);
    if (!a || !b || !g)
        throw InsufficientLevels("estimate_rates: need two levels with non-zero data from level " +
                                 std::to_string(first_level));
    return {-a->slope, -b->slope, g->slope,
            std::exp2(a->intercept), std::exp2(b->intercept), std::exp2(g->intercept)};
}

/// Upper estimate of the remaining weak error |E[P - P_L]|, assuming the
/// corrections keep decaying like M^{-alpha l}. Each supplied mean (the last
/// one belongs to the finest level L) is extrapolated to level L and summed
/// geometrically; the largest of these is returned.
inline double remainder_bias_estimate(std::span<const double> recent_means, double alpha, int refinement)
{
    if (!(alpha > 0.0))
        throw BadInput("remainder_bias_estimate: alpha must be positive");
    if (recent_means.empty())
        throw BadInput("remainder_bias_estimate: need at least one level mean");
    const double ma = std::pow(static_cast<double>(refinement), alpha);
    const std::size_t last = recent_means.size() - 1;
    double bound = 0.0;
    for (std::size_t j = 0; j <= last; ++j) {
        const double decay = std::pow(ma, -static_cast<double>(last - j));
        bound = std::max(bound, std::abs(recent_means[j]) * decay / (ma - 1.0));
    }
    return bound;
}

}  // namespace mlmc
