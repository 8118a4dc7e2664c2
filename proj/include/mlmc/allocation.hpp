#pragma once

// Sample allocation across levels for a prescribed estimator variance.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "mlmc/error.hpp"

namespace mlmc {

struct Allocation {
    std::vector<std::int64_t> samples;
    double lagrange = 0.0;
};

namespace detail {

inline void check_allocation_input(std::span<const double> variances, std::span<const double> costs)
{
    if (variances.size() != costs.size() || variances.empty())
        throw BadInput("allocation: variances and costs must be non-empty and of equal length");
    for (std::size_t l = 0; l < costs.size(); ++l) {
        if (!(costs[l] > 0.0))
            throw BadInput("allocation: costs must be positive");
        if (!(variances[l] >= 0.0))
            throw BadInput("allocation: variances must be non-negative");
    }
}

inline double sum_sqrt_vc(std::span<const double> variances, std::span<const double> costs)
{
    double s = 0.0;
    for (std::size_t l = 0; l < costs.size(); ++l)
        s += std::sqrt(variances[l] * costs[l]);
    return s;
}

}  // namespace detail

/// Minimises the cost sum N_l C_l subject to sum V_l / N_l <= target_variance.
/// The continuous optimum is N_l = lambda sqrt(V_l / C_l) with
/// lambda = sum sqrt(V_l C_l) / target_variance; sample counts are rounded up,
/// and a level with zero variance gets a single sample.
inline Allocation optimal_allocation(std::span<const double> variances,
                                     std::span<const double> costs, double target_variance)
{
    detail::check_allocation_input(variances, costs);
    if (!(target_variance > 0.0))
        throw BadInput("optimal_allocation: target variance must be positive");

    Allocation out;
    out.lagrange = detail::sum_sqrt_vc(variances, costs) / target_variance;
    out.samples.resize(costs.size());
    for (std::size_t l = 0; l < costs.size(); ++l) {
        const double n = out.lagrange * std::sqrt(variances[l] / costs[l]);
        out.samples[l] = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(n)));
    }
    return out;
}

/// Total cost eps^-2 (sum sqrt(V_l C_l))^2 of the continuous optimal allocation.
inline double theoretical_total_cost(std::span<const double> variances,
                                     std::span<const double> costs, double eps)
{
    detail::check_allocation_input(variances, costs);
    if (!(eps > 0.0))
        throw BadInput("theoretical_total_cost: eps must be positive");
    const double s = detail::sum_sqrt_vc(variances, costs);
    return s * s / (eps * eps);
}

/// Estimator variance sum V_l / N_l achieved by an allocation.
inline double achieved_variance(std::span<const double> variances,
                                std::span<const std::int64_t> samples)
{
    if (variances.size() != samples.size())
        throw BadInput("achieved_variance: length mismatch");
    double v = 0.0;
    for (std::size_t l = 0; l < samples.size(); ++l)
        v += variances[l] / static_cast<double>(samples[l]);
    return v;
}

inline double allocation_cost(std::span<const double> costs, std::span<const std::int64_t> samples)
{
    if (costs.size() != samples.size())
        throw BadInput("allocation_cost: length mismatch");
    double c = 0.0;
    for (std::size_t l = 0; l < samples.size(); ++l)
        c += costs[l] * static_cast<double>(samples[l]);
    return c;
}

/// Accuracy targets for an estimator with several outputs.
struct MultiOutputSpec {
    std::vector<double> eps;

    std::size_t outputs() const { return eps.size(); }
};

/// Normalised level variance max_m V_{l,m} / eps_m^2. Allocating against these
/// with target 1 satisfies every per-output constraint sum_l V_{l,m}/N_l <= eps_m^2.
inline double multi_output_level_variance(std::span<const double> per_output_variances,
                                          const MultiOutputSpec& spec)
{
    if (per_output_variances.size() != spec.eps.size() || spec.eps.empty())
        throw BadInput("multi_output_level_variance: one variance per output required");
    double v = 0.0;
    for (std::size_t m = 0; m < spec.eps.size(); ++m) {
        if (!(spec.eps[m] > 0.0))
            throw BadInput("multi_output_level_variance: eps_m must be positive");
        v = std::max(v, per_output_variances[m] / (spec.eps[m] * spec.eps[m]));
    }
    return v;
}

}  // namespace mlmc
