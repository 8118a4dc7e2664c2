#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "mlmc/driver.hpp"
#include "mlmc/payoffs.hpp"
#include "mlmc/samplers.hpp"
#include "stat_tests.hpp"

using namespace mlmc;

namespace {

struct ConstantSampler {
    double c = 0.0;
    LevelSample operator()(const StreamKey& key) const
    {
        const double y = key.level == 0 ? c : 0.0;
        return {y, c, 1.0 + key.level};
    }
};

// f(l, z) = exp(z / 2) (1 + 2^-l); the correction shares z between levels.
double telescoping_f(int level, double z)
{
    return std::exp(0.5 * z) * (1.0 + std::ldexp(1.0, -level));
}

struct TelescopingSampler {
    LevelSample operator()(const StreamKey& key) const
    {
        const double z = CounterStream(key).normal();
        const int l = static_cast<int>(key.level);
        const double fine = telescoping_f(l, z);
        const double coarse = l > 0 ? telescoping_f(l - 1, z) : 0.0;
        return {fine - coarse, fine, std::exp2(l)};
    }
};

struct NanSampler {
    LevelSample operator()(const StreamKey& key) const
    {
        return {key.level == 1 && key.sample_index == 7 ? std::numeric_limits<double>::quiet_NaN() : 1.0, 1.0, 1.0};
    }
};

struct TwoOutputSampler {
    MultiLevelSample operator()(const StreamKey& key) const
    {
        CounterStream s(key);
        const double l = key.level;
        const double a = std::exp2(-l) + std::exp2(-l) * s.normal();
        const double b = 3.0 * std::exp2(-l) + 5.0 * std::exp2(-0.75 * l) * s.normal();
        return {{a, b}, {a, b}, std::exp2(l)};
    }
};

MlmcConfig config(double eps, std::uint64_t seed = 1)
{
    MlmcConfig c;
    c.eps = eps;
    c.seed = seed;
    return c;
}

bool identical(const MlmcResult& a, const MlmcResult& b)
{
    if (a.estimate != b.estimate || a.allocation != b.allocation || a.total_cost != b.total_cost ||
        a.levels.size() != b.levels.size())
        return false;
    for (std::size_t l = 0; l < a.levels.size(); ++l)
        if (a.levels[l].sum_y != b.levels[l].sum_y || a.levels[l].sum_y2 != b.levels[l].sum_y2 ||
            a.levels[l].sum_y4 != b.levels[l].sum_y4)
            return false;
    return true;
}

// Mean accounted cost over ten seeds. A small pilot keeps the fixed pilot
// cost from masking the asymptotic regime at these modest accuracies.
std::vector<double> complexity_costs(const SyntheticRateSampler& s, const std::vector<double>& eps)
{
    std::vector<double> costs;
    for (double e : eps) {
        double total = 0.0;
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            MlmcConfig c = config(e, 17 + seed);
            c.l_max = 20;
            c.n_init = 10;
            total += run_adaptive_mlmc(s, c).total_cost;
        }
        costs.push_back(total / 10.0);
    }
    return costs;
}

double log_log_slope(const std::vector<double>& eps, const std::vector<double>& cost)
{
    std::vector<double> x, y;
    for (std::size_t i = 0; i < eps.size(); ++i) {
        x.push_back(std::log2(eps[i]));
        y.push_back(std::log2(cost[i]));
    }
    return least_squares(x, y).slope;
}

}  // namespace

TEST(AdaptiveMlmc, ZeroVarianceStopsAtLevelFour)
{
    MlmcConfig c = config(0.1);
    c.alpha_override = 1.0;
    const auto r = run_adaptive_mlmc(ZeroVarianceSampler{}, c);
    EXPECT_EQ(r.finest_level(), 4);
    EXPECT_DOUBLE_EQ(r.estimate, 1.9375);
    EXPECT_EQ(r.terminated_by, Termination::BiasConverged);
    EXPECT_LE(r.bias_estimate, 0.1 / std::sqrt(2.0));
}

TEST(AdaptiveMlmc, ZeroCorrectionsStopAtMinimumLevel)
{
    const auto r = run_adaptive_mlmc(ConstantSampler{2.5}, config(0.01));
    EXPECT_EQ(r.estimate, 2.5);
    EXPECT_EQ(r.finest_level(), 2);
    EXPECT_EQ(r.terminated_by, Termination::BiasConverged);
}

TEST(AdaptiveMlmc, WarnsWhenAFinerLevelShowsNoVariance)
{
    struct RareJumps {
        LevelSample operator()(const StreamKey& key) const
        {
            const double z = CounterStream(key).normal();
            const double y = key.level == 0 ? z : 0.0;
            return {y, y, 1.0};
        }
    };
    const auto r = run_adaptive_mlmc(RareJumps{}, config(0.1));
    ASSERT_EQ(r.warnings.size(), 1u);
    EXPECT_NE(r.warnings[0].find("level 1"), std::string::npos);
    EXPECT_TRUE(run_adaptive_mlmc(ConstantSampler{2.5}, config(0.01)).warnings.empty());
}

TEST(AdaptiveMlmc, LMaxReachedIsAResultState)
{
    MlmcConfig c = config(0.1);
    c.alpha_override = 1.0;
    c.l_max = 3;
    const auto r = run_adaptive_mlmc(ZeroVarianceSampler{}, c);
    EXPECT_EQ(r.terminated_by, Termination::LMaxReached);
    EXPECT_EQ(r.finest_level(), 3);
    EXPECT_FALSE(r.warnings.empty());
}

TEST(AdaptiveMlmc, ResultInvariants)
{
    const SdeSampler s{SdeModel::gbm(100, 0.05, 0.2, 1.0), SchemeKind::Milstein,
                       PayoffSpec{PayoffKind::European, 100.0, 0.0, DigitalSmoothing::None, 10, std::exp(-0.05)}};
    const auto r = run_adaptive_mlmc(s, config(0.1, 3));
    double sum = 0.0, cost = 0.0, var = 0.0;
    for (const auto& lv : r.levels) {
        sum += level_mean(lv);
        cost += lv.sum_cost;
        var += level_statistics(lv).variance / static_cast<double>(lv.count);
    }
    EXPECT_DOUBLE_EQ(r.estimate, sum);
    EXPECT_DOUBLE_EQ(r.total_cost, cost);
    EXPECT_LE(var, 0.5 * 0.1 * 0.1);
    EXPECT_DOUBLE_EQ(r.estimator_variance, var);
    ASSERT_EQ(r.allocation.size(), r.levels.size());
    for (std::size_t l = 0; l < r.levels.size(); ++l)
        EXPECT_EQ(r.allocation[l], r.levels[l].count);
    EXPECT_TRUE(std::isfinite(r.rates.beta));
}

TEST(AdaptiveMlmc, SampleCountsNeverDecrease)
{
    const SdeSampler s{SdeModel::gbm(100, 0.05, 0.2, 1.0), SchemeKind::EulerMaruyama,
                       PayoffSpec{PayoffKind::European, 100.0}};
    std::vector<std::vector<std::int64_t>> history;
    run_adaptive_mlmc(s, config(0.05, 5), [&](std::span<const LevelStats> levels) {
        std::vector<std::int64_t> n;
        for (const auto& lv : levels)
            n.push_back(lv.count);
        history.push_back(n);
    });
    ASSERT_GE(history.size(), 2u);
    for (std::size_t i = 1; i < history.size(); ++i) {
        ASSERT_GE(history[i].size(), history[i - 1].size());
        for (std::size_t l = 0; l < history[i - 1].size(); ++l)
            EXPECT_GE(history[i][l], history[i - 1][l]);
    }
}

TEST(AdaptiveMlmc, ReproducibleAndIndependentOfWorkerCount)
{
    const SdeSampler s{SdeModel::gbm(100, 0.05, 0.2, 1.0), SchemeKind::Milstein,
                       PayoffSpec{PayoffKind::Asian, 100.0}};
    const MlmcConfig c = config(0.05, 42);
    const auto a = run_adaptive_mlmc(s, c);
    const auto b = run_adaptive_mlmc(s, c);
    EXPECT_TRUE(identical(a, b));
    MlmcConfig c4 = c;
    c4.workers = 4;
    EXPECT_TRUE(identical(a, run_adaptive_mlmc(s, c4)));
    EXPECT_FALSE(identical(a, run_adaptive_mlmc(s, config(0.05, 43))));
}

TEST(AdaptiveMlmc, SamplerErrorsPropagate)
{
    EXPECT_THROW(run_adaptive_mlmc(NanSampler{}, config(0.1)), NonFinite);
}

TEST(AdaptiveMlmc, ConfigValidation)
{
    EXPECT_THROW(run_adaptive_mlmc(ZeroVarianceSampler{}, config(-0.1)), BadInput);
    MlmcConfig c = config(0.1);
    c.l_min = 5;
    c.l_max = 4;
    EXPECT_THROW(run_adaptive_mlmc(ZeroVarianceSampler{}, c), BadInput);
    c = config(0.1);
    c.n_init = 1;
    EXPECT_THROW(run_adaptive_mlmc(ZeroVarianceSampler{}, c), BadInput);
}

TEST(AdaptiveMlmc, TelescopingSumMatchesDirectFineSampling)
{
    // Fixed L = 3 runs against plain Monte Carlo of f(3, Z).
    std::vector<double> estimates;
    for (std::uint64_t seed = 0; seed < 60; ++seed) {
        MlmcConfig c = config(0.02, 1000 + seed);
        c.l_min = c.l_max = 3;
        estimates.push_back(run_adaptive_mlmc(TelescopingSampler{}, c).estimate);
    }
    std::vector<double> direct(100'000);
    for (std::size_t i = 0; i < direct.size(); ++i)
        direct[i] = telescoping_f(3, CounterStream({777, 3, i}).normal());
    EXPECT_GT(mlmc::testing::welch_p_value(estimates, direct), 0.01);
}

TEST(AdaptiveMlmc, ComplexityWhenVarianceDecaysFasterThanCost)
{
    const std::vector<double> eps{0.1, 0.05, 0.025, 0.0125};
    const double slope = log_log_slope(eps, complexity_costs({1.0, 2.0, 1.0}, eps));
    EXPECT_NEAR(slope, -2.0, 0.3);
}

TEST(AdaptiveMlmc, ComplexityWhenCostGrowsFasterThanVarianceDecays)
{
    const std::vector<double> eps{0.1, 0.05, 0.025, 0.0125};
    const double slope = log_log_slope(eps, complexity_costs({1.0, 1.0, 2.0}, eps));
    EXPECT_NEAR(slope, -3.0, 0.4);
}

TEST(AdaptiveMlmc, EuropeanCallWithinThreeEpsilon)
{
    const double exact = black_scholes_call(100, 100, 0.05, 0.2, 1.0);
    const SdeSampler s{SdeModel::gbm(100, 0.05, 0.2, 1.0), SchemeKind::Milstein,
                       PayoffSpec{PayoffKind::European, 100.0, 0.0, DigitalSmoothing::None, 10, std::exp(-0.05)}};
    int hits = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed)
        hits += std::abs(run_adaptive_mlmc(s, config(0.05, seed)).estimate - exact) <= 0.15;
    EXPECT_GE(hits, 19);
}

TEST(AdaptiveMlmcMulti, EveryOutputMeetsItsVarianceTarget)
{
    MlmcConfig c = config(1.0, 9);
    const MultiOutputSpec spec{{0.01, 0.05}};
    const auto r = run_adaptive_mlmc_multi(TwoOutputSampler{}, c, spec);
    ASSERT_EQ(r.estimates.size(), 2u);
    for (std::size_t m = 0; m < 2; ++m) {
        double var = 0.0;
        for (const auto& lv : r.levels)
            var += level_statistics(lv[m]).variance / static_cast<double>(lv[m].count);
        EXPECT_LE(var, 0.5 * spec.eps[m] * spec.eps[m]) << m;
    }
    EXPECT_NEAR(r.estimates[0], 2.0, 3 * 0.01);
    EXPECT_NEAR(r.estimates[1], 6.0, 3 * 0.05);
    EXPECT_THROW(run_adaptive_mlmc_multi(TwoOutputSampler{}, c, MultiOutputSpec{{0.1, -1.0}}), BadInput);
}
