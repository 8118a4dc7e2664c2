#pragma once

// Adaptive multilevel driver.
//
// The mean square error is split evenly: the estimator variance
// sum_l V_l / N_l is held below eps^2 / 2 by the optimal allocation, and the
// finest level L is increased until the extrapolated remaining bias is below
// eps / sqrt(2). Samples are only ever added, never discarded.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mlmc/allocation.hpp"
#include "mlmc/batch.hpp"
#include "mlmc/error.hpp"
#include "mlmc/rates.hpp"
#include "mlmc/statistics.hpp"

namespace mlmc {

struct MlmcConfig {
    double eps = 0.01;
    int refinement = 2;
    std::int64_t n_init = 100;
    int l_min = 2;
    int l_max = 10;
    std::optional<double> alpha_override;
    std::optional<double> beta_override;
    std::optional<double> gamma_override;
    std::uint64_t seed = 0;
    int workers = 1;

    void validate() const
    {
        if (!(eps > 0.0))
            throw BadInput("mlmc config: eps must be positive");
        if (refinement < 2)
            throw BadInput("mlmc config: refinement must be at least 2");
        if (n_init < 2)
            throw BadInput("mlmc config: n_init must be at least 2");
        if (l_min < 0 || l_min > l_max)
            throw BadInput("mlmc config: need 0 <= l_min <= l_max");
        if (alpha_override && !(*alpha_override > 0.0))
            throw BadInput("mlmc config: alpha override must be positive");
    }
};

enum class Termination { BiasConverged, LMaxReached };

inline const char* to_string(Termination t)
{
    return t == Termination::BiasConverged ? "BiasConverged" : "LMaxReached";
}

struct MlmcResult {
    double estimate = 0.0;
    std::vector<LevelStats> levels;
    std::vector<std::int64_t> allocation;
    /// Fitted over levels >= 1; entries are NaN when no fit was possible and
    /// no override was given.
    RateEstimates rates;
    double total_cost = 0.0;
    Termination terminated_by = Termination::LMaxReached;
    double estimator_variance = 0.0;
    double bias_estimate = 0.0;
    std::vector<std::string> warnings;

    int finest_level() const { return static_cast<int>(levels.size()) - 1; }
};

struct MultiMlmcResult {
    std::vector<double> estimates;
    /// levels[l][m]: statistics of output m on level l.
    std::vector<std::vector<LevelStats>> levels;
    std::vector<std::int64_t> allocation;
    double total_cost = 0.0;
    Termination terminated_by = Termination::LMaxReached;
    std::vector<double> bias_estimates;
    std::vector<std::string> warnings;

    int finest_level() const { return static_cast<int>(levels.size()) - 1; }
};

/// Called after every outer iteration with the current per-level statistics
/// (first output only for multi-output runs).
using IterationObserver = std::function<void(std::span<const LevelStats>)>;

namespace detail {

/// The weak rate used by the bias test: fitted from levels >= 1, falling back
/// to first order when the fit is unavailable or non-positive.
inline double bias_alpha(std::span<const double> means, const MlmcConfig& cfg)
{
    if (cfg.alpha_override)
        return *cfg.alpha_override;
    const auto fit = fit_log2_by_level(means, 1);
    if (!fit || !(-fit->slope > 0.0))
        return 1.0;
    return -fit->slope;
}

inline double remainder_for_levels(std::span<const double> means, double alpha, int refinement)
{
    const std::size_t finest = means.size() - 1;
    if (finest == 0)
        return std::numeric_limits<double>::infinity();
    const std::size_t count = std::min<std::size_t>(3, finest);
    return remainder_bias_estimate(means.subspan(finest + 1 - count, count), alpha, refinement);
}

struct EngineState {
    std::vector<std::vector<LevelStats>> levels;  // [level][output]
    Termination terminated_by = Termination::LMaxReached;
    std::vector<double> bias;
    std::vector<double> alphas;
};

template <class Sampler>
EngineState run_engine(const Sampler& sampler, const MlmcConfig& cfg, std::span<const double> eps,
                       const IterationObserver& observer)
{
    cfg.validate();
    const std::size_t outputs = eps.size();
    EngineState st;

    auto grow = [&](int level, std::int64_t target) {
        auto& cur = st.levels[static_cast<std::size_t>(level)];
        const std::int64_t have = cur[0].count;
        if (target <= have)
            return;
        const auto add = accumulate_samples(sampler, cfg.seed, level, have, target, outputs, cfg.workers);
        for (std::size_t m = 0; m < outputs; ++m)
            cur[m] += add[m];
    };

    auto add_level = [&](int level) {
        st.levels.emplace_back(outputs);
        for (auto& s : st.levels.back())
            s.level = level;
        grow(level, cfg.n_init);
    };

    for (int l = 0; l <= cfg.l_min; ++l)
        add_level(l);

    for (;;) {
        const int finest = static_cast<int>(st.levels.size()) - 1;
        const std::size_t nlev = st.levels.size();

        // Allocate, add samples, refresh the variance estimates, repeat until
        // the current estimates need no further samples.
        for (;;) {
            std::vector<double> v(nlev), c(nlev);
            for (std::size_t l = 0; l < nlev; ++l) {
                c[l] = level_statistics(st.levels[l][0]).cost_per_sample;
                if (!(c[l] > 0.0))
                    throw BadInput("sampler reported non-positive cost on level " + std::to_string(l));
                if (outputs == 1) {
                    v[l] = level_statistics(st.levels[l][0]).variance;
                } else {
                    std::vector<double> per(outputs);
                    for (std::size_t m = 0; m < outputs; ++m)
                        per[m] = level_statistics(st.levels[l][m]).variance;
                    v[l] = multi_output_level_variance(per, MultiOutputSpec{{eps.begin(), eps.end()}});
                }
            }
            const double target = outputs == 1 ? 0.5 * eps[0] * eps[0] : 0.5;
            const Allocation alloc = optimal_allocation(v, c, target);
            bool added = false;
            for (std::size_t l = 0; l < nlev; ++l) {
                if (alloc.samples[l] > st.levels[l][0].count) {
                    grow(static_cast<int>(l), alloc.samples[l]);
                    added = true;
                }
            }
            if (!added)
                break;
        }

        if (observer) {
            std::vector<LevelStats> first;
            for (const auto& lv : st.levels)
                first.push_back(lv[0]);
            observer(first);
        }

        st.bias.assign(outputs, 0.0);
        st.alphas.assign(outputs, 0.0);
        bool converged = finest > 0;
        for (std::size_t m = 0; m < outputs; ++m) {
            std::vector<double> means(nlev);
            for (std::size_t l = 0; l < nlev; ++l)
                means[l] = level_mean(st.levels[l][m]);
            st.alphas[m] = bias_alpha(means, cfg);
            st.bias[m] = remainder_for_levels(means, st.alphas[m], cfg.refinement);
            if (!(st.bias[m] <= eps[m] / std::sqrt(2.0)))
                converged = false;
        }
        if (converged) {
            st.terminated_by = Termination::BiasConverged;
            break;
        }
        if (finest >= cfg.l_max) {
            st.terminated_by = Termination::LMaxReached;
            break;
        }
        add_level(finest + 1);
    }
    return st;
}

inline std::vector<std::string> kurtosis_warnings(const std::vector<std::vector<LevelStats>>& levels)
{
    std::vector<std::string> out;
    for (std::size_t l = 1; l < levels.size(); ++l) {
        for (std::size_t m = 0; m < levels[l].size(); ++m) {
            const double k = kurtosis(levels[l][m]);
            if (k > kKurtosisWarningThreshold)
                out.push_back("level " + std::to_string(l) + (levels[l].size() > 1 ? " output " + std::to_string(m) : "") +
                              ": kurtosis " + std::to_string(k) + " exceeds " +
                              std::to_string(static_cast<int>(kKurtosisWarningThreshold)) +
                              "; variance estimates may be unreliable");
        }
    }
    return out;
}

/// Flags levels whose corrections were all identical while the level below
/// varied: typical of a discontinuous payoff with too small a pilot, where the
/// level then keeps n_init samples and the bias test sees a spurious zero mean.
inline std::vector<std::string> zero_variance_warnings(const std::vector<std::vector<LevelStats>>& levels)
{
    std::vector<std::string> out;
    for (std::size_t l = 1; l < levels.size(); ++l) {
        for (std::size_t m = 0; m < levels[l].size(); ++m) {
            if (level_statistics(levels[l][m]).variance == 0.0 && level_statistics(levels[l - 1][m]).variance > 0.0)
                out.push_back("level " + std::to_string(l) + (levels[l].size() > 1 ? " output " + std::to_string(m) : "") +
                              ": all " + std::to_string(levels[l][m].count) +
                              " corrections identical; a larger n_init may be needed");
        }
    }
    return out;
}

}  // namespace detail

/// Rates fitted from finished level statistics (levels >= first_level). Each
/// rate falls back to its override, or NaN, when it cannot be fitted.
inline RateEstimates fitted_rates(std::span<const LevelStats> levels, const MlmcConfig& cfg, int first_level = 1)
{
    const std::size_t n = levels.size();
    std::vector<double> means(n), vars(n), costs(n);
    for (std::size_t l = 0; l < n; ++l) {
        const auto mom = level_statistics(levels[l]);
        means[l] = mom.mean;
        vars[l] = mom.variance;
        costs[l] = mom.cost_per_sample;
    }
    constexpr double nan = std::numeric_limits<double>::quiet_NaN();
    RateEstimates r{nan, nan, nan, nan, nan, nan};
    if (const auto f = fit_log2_by_level(means, first_level)) {
        r.alpha = -f->slope;
        r.c1 = std::exp2(f->intercept);
    }
    if (const auto f = fit_log2_by_level(vars, first_level)) {
        r.beta = -f->slope;
        r.c2 = std::exp2(f->intercept);
    }
    if (const auto f = fit_log2_by_level(costs, first_level)) {
        r.gamma = f->slope;
        r.c3 = std::exp2(f->intercept);
    }
    if (cfg.alpha_override)
        r.alpha = *cfg.alpha_override;
    if (cfg.beta_override)
        r.beta = *cfg.beta_override;
    if (cfg.gamma_override)
        r.gamma = *cfg.gamma_override;
    return r;
}

/// Runs the adaptive algorithm to RMS accuracy cfg.eps.
template <LevelSampler Sampler>
MlmcResult run_adaptive_mlmc(const Sampler& sampler, const MlmcConfig& cfg,
                             const IterationObserver& observer = {})
{
    const double eps[1] = {cfg.eps};
    detail::EngineState st = detail::run_engine(sampler, cfg, eps, observer);

    MlmcResult res;
    res.terminated_by = st.terminated_by;
    res.bias_estimate = st.bias[0];
    for (const auto& lv : st.levels) {
        const LevelStats& s = lv[0];
        res.levels.push_back(s);
        res.allocation.push_back(s.count);
        res.estimate += level_mean(s);
        res.total_cost += s.sum_cost;
        res.estimator_variance += level_statistics(s).variance / static_cast<double>(s.count);
    }
    res.rates = fitted_rates(res.levels, cfg);
    if (!cfg.alpha_override && !std::isfinite(res.rates.alpha))
        res.rates.alpha = st.alphas[0];
    res.warnings = detail::kurtosis_warnings(st.levels);
    for (auto& w : detail::zero_variance_warnings(st.levels))
        res.warnings.push_back(std::move(w));
    if (res.terminated_by == Termination::LMaxReached)
        res.warnings.push_back("finest level l_max = " + std::to_string(cfg.l_max) +
                               " reached before the bias test passed");
    return res;
}

/// Multi-output variant: one allocation for all outputs, using the normalised
/// variances max_m V_{l,m} / eps_m^2, and a bias test per output.
template <MultiLevelSampler Sampler>
MultiMlmcResult run_adaptive_mlmc_multi(const Sampler& sampler, const MlmcConfig& cfg,
                                        const MultiOutputSpec& spec,
                                        const IterationObserver& observer = {})
{
    if (spec.eps.empty())
        throw BadInput("multi-output run needs at least one output");
    for (double e : spec.eps)
        if (!(e > 0.0))
            throw BadInput("multi-output run: every eps_m must be positive");
    detail::EngineState st = detail::run_engine(sampler, cfg, spec.eps, observer);

    MultiMlmcResult res;
    res.terminated_by = st.terminated_by;
    res.bias_estimates = st.bias;
    res.estimates.assign(spec.outputs(), 0.0);
    for (const auto& lv : st.levels) {
        res.allocation.push_back(lv[0].count);
        res.total_cost += lv[0].sum_cost;
        for (std::size_t m = 0; m < lv.size(); ++m)
            res.estimates[m] += level_mean(lv[m]);
    }
    res.levels = std::move(st.levels);
    res.warnings = detail::kurtosis_warnings(res.levels);
    for (auto& w : detail::zero_variance_warnings(res.levels))
        res.warnings.push_back(std::move(w));
    return res;
}

}  // namespace mlmc
