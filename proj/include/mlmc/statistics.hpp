#pragma once

#include <cmath>
#include <algorithm>
#include <cstdint>
#include <string>

#include "mlmc/error.hpp"

namespace mlmc {

/// One draw of the level-l correction Y_l (level 0: P_0 itself), the fine
/// payoff P_l behind it, and its accounted cost.
struct LevelSample {
    double correction = 0.0;
    double fine = 0.0;
    double cost = 0.0;
};

/// Running power sums for the correction samples Y of one level, plus the
/// fine-level payoff P that produced them (reported, never used for
/// allocation).
struct LevelStats {
    int level = 0;
    std::int64_t count = 0;
    double sum_y = 0.0;
    double sum_y2 = 0.0;
    double sum_y3 = 0.0;
    double sum_y4 = 0.0;
    double sum_p = 0.0;
    double sum_p2 = 0.0;
    double sum_cost = 0.0;

    void add(double y, double p, double cost)
    {
        const double y2 = y * y;
        ++count;
        sum_y += y;
        sum_y2 += y2;
        sum_y3 += y2 * y;
        sum_y4 += y2 * y2;
        sum_p += p;
        sum_p2 += p * p;
        sum_cost += cost;
    }

    LevelStats& operator+=(const LevelStats& other)
    {
        count += other.count;
        sum_y += other.sum_y;
        sum_y2 += other.sum_y2;
        sum_y3 += other.sum_y3;
        sum_y4 += other.sum_y4;
        sum_p += other.sum_p;
        sum_p2 += other.sum_p2;
        sum_cost += other.sum_cost;
        return *this;
    }

    friend LevelStats operator+(LevelStats a, const LevelStats& b) { return a += b; }
};

struct LevelMoments {
    double mean = 0.0;
    double variance = 0.0;
    double cost_per_sample = 0.0;
};

namespace detail {

inline double unbiased_variance(double sum, double sum2, std::int64_t n)
{
    const double nd = static_cast<double>(n);
    const double mean = sum / nd;
    const double biased = std::max(0.0, sum2 / nd - mean * mean);
    return biased * nd / (nd - 1.0);
}

}  // namespace detail

/// Sample mean, unbiased sample variance and mean cost of one level.
inline LevelMoments level_statistics(const LevelStats& s)
{
    if (s.count < 2)
        throw InsufficientSamples("level_statistics: need at least two samples on level " +
                                  std::to_string(s.level));
    const double n = static_cast<double>(s.count);
    return {s.sum_y / n, detail::unbiased_variance(s.sum_y, s.sum_y2, s.count), s.sum_cost / n};
}

inline double level_mean(const LevelStats& s)
{
    if (s.count < 1)
        throw InsufficientSamples("level_mean: level " + std::to_string(s.level) + " is empty");
    return s.sum_y / static_cast<double>(s.count);
}

inline double payoff_mean(const LevelStats& s)
{
    return s.count > 0 ? s.sum_p / static_cast<double>(s.count) : 0.0;
}

inline double payoff_variance(const LevelStats& s)
{
    return s.count > 1 ? detail::unbiased_variance(s.sum_p, s.sum_p2, s.count) : 0.0;
}

/// Kurtosis E[(Y-mu)^4] / Var[Y]^2 of the correction samples; 0 when the
/// variance vanishes.
inline double kurtosis(const LevelStats& s)
{
    if (s.count < 2)
        return 0.0;
    const double n = static_cast<double>(s.count);
    const double m1 = s.sum_y / n;
    const double m2 = s.sum_y2 / n;
    const double m3 = s.sum_y3 / n;
    const double m4 = s.sum_y4 / n;
    const double var = m2 - m1 * m1;
    if (!(var > 1e-300))
        return 0.0;
    const double central4 = m4 - 4.0 * m1 * m3 + 6.0 * m1 * m1 * m2 - 3.0 * m1 * m1 * m1 * m1;
    return std::max(0.0, central4) / (var * var);
}

inline constexpr double kKurtosisWarningThreshold = 100.0;

}  // namespace mlmc
