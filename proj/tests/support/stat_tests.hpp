#pragma once

// Classical hypothesis tests used as oracles by the test suites. They only
// depend on Boost.Math, never on the library under test.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>

namespace mlmc::testing {

struct SampleSummary {
    double mean = 0.0;
    double variance = 0.0;
    double n = 0.0;
};

inline SampleSummary summarize(const std::vector<double>& x)
{
    const double n = static_cast<double>(x.size());
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : x)
        ss += (v - mean) * (v - mean);
    return {mean, ss / (n - 1.0), n};
}

/// Two-sided p-value of Welch's test for equal means (normal approximation,
/// appropriate for the large samples used here).
inline double welch_p_value(const SampleSummary& a, const SampleSummary& b)
{
    const double se = std::sqrt(a.variance / a.n + b.variance / b.n);
    if (se == 0.0)
        return a.mean == b.mean ? 1.0 : 0.0;
    const double z = std::abs(a.mean - b.mean) / se;
    return 2.0 * boost::math::cdf(boost::math::complement(boost::math::normal(), z));
}

inline double welch_p_value(const std::vector<double>& a, const std::vector<double>& b)
{
    return welch_p_value(summarize(a), summarize(b));
}

/// Kolmogorov-Smirnov distance between a sample and a continuous CDF.
inline double ks_statistic(std::vector<double> x, const std::function<double(double)>& cdf)
{
    std::sort(x.begin(), x.end());
    const double n = static_cast<double>(x.size());
    double d = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double f = cdf(x[i]);
        d = std::max({d, f - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - f});
    }
    return d;
}

/// Two-sample Kolmogorov-Smirnov distance.
inline double ks_statistic(std::vector<double> a, std::vector<double> b)
{
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        const double v = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= v)
            ++i;
        while (j < b.size() && b[j] <= v)
            ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }
    return d;
}

/// Asymptotic 1% critical values of the KS statistic.
inline double ks_critical_1pct(double n)
{
    return 1.6276 / std::sqrt(n);
}

inline double ks_critical_1pct(double n, double m)
{
    return 1.6276 * std::sqrt((n + m) / (n * m));
}

/// Pearson chi-square goodness of fit. Bins whose expected count is below 5
/// are pooled with their neighbour. Returns the p-value.
inline double chi_square_p_value(const std::vector<double>& observed, const std::vector<double>& expected)
{
    std::vector<double> o, e;
    double acc_o = 0.0, acc_e = 0.0;
    for (std::size_t i = 0; i < observed.size(); ++i) {
        acc_o += observed[i];
        acc_e += expected[i];
        if (acc_e >= 5.0) {
            o.push_back(acc_o);
            e.push_back(acc_e);
            acc_o = acc_e = 0.0;
        }
    }
    if (acc_e > 0.0 || acc_o > 0.0) {
        if (e.empty()) {
            o.push_back(acc_o);
            e.push_back(acc_e);
        } else {
            o.back() += acc_o;
            e.back() += acc_e;
        }
    }
    if (e.size() < 2)
        return 1.0;
    double stat = 0.0;
    for (std::size_t i = 0; i < e.size(); ++i)
        stat += (o[i] - e[i]) * (o[i] - e[i]) / e[i];
    const boost::math::chi_squared dist(static_cast<double>(e.size() - 1));
    return boost::math::cdf(boost::math::complement(dist, stat));
}

/// Chi-square test of integer samples against a probability mass function.
inline double chi_square_p_value(const std::vector<long long>& samples, const std::function<double(long long)>& pmf,
                                 long long max_value)
{
    std::vector<double> obs(static_cast<std::size_t>(max_value + 2), 0.0);
    std::vector<double> exp(obs.size(), 0.0);
    for (long long s : samples)
        obs[static_cast<std::size_t>(std::clamp(s, 0LL, max_value + 1))] += 1.0;
    double tail = 1.0;
    for (long long k = 0; k <= max_value; ++k) {
        exp[static_cast<std::size_t>(k)] = pmf(k) * static_cast<double>(samples.size());
        tail -= pmf(k);
    }
    exp.back() = std::max(tail, 0.0) * static_cast<double>(samples.size());
    return chi_square_p_value(obs, exp);
}

/// Two-sample chi-square test of homogeneity for integer samples. Values are
/// binned individually; sparse bins are pooled until both expected counts
/// reach 5. Returns the p-value.
inline double chi_square_homogeneity_p_value(const std::vector<long long>& a, const std::vector<long long>& b)
{
    long long lo = a.front(), hi = a.front();
    for (const auto* v : {&a, &b})
        for (long long x : *v) {
            lo = std::min(lo, x);
            hi = std::max(hi, x);
        }
    const auto width = static_cast<std::size_t>(hi - lo + 1);
    std::vector<double> ca(width, 0.0), cb(width, 0.0);
    for (long long x : a)
        ca[static_cast<std::size_t>(x - lo)] += 1.0;
    for (long long x : b)
        cb[static_cast<std::size_t>(x - lo)] += 1.0;
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    const double fa = na / (na + nb), fb = nb / (na + nb);
    std::vector<double> pa, pb;
    double acc_a = 0.0, acc_b = 0.0;
    for (std::size_t i = 0; i < width; ++i) {
        acc_a += ca[i];
        acc_b += cb[i];
        const double tot = acc_a + acc_b;
        if (tot * fa >= 5.0 && tot * fb >= 5.0) {
            pa.push_back(acc_a);
            pb.push_back(acc_b);
            acc_a = acc_b = 0.0;
        }
    }
    if (!pa.empty()) {
        pa.back() += acc_a;
        pb.back() += acc_b;
    }
    if (pa.size() < 2)
        return 1.0;
    double stat = 0.0;
    for (std::size_t i = 0; i < pa.size(); ++i) {
        const double tot = pa[i] + pb[i];
        const double ea = tot * fa, eb = tot * fb;
        stat += (pa[i] - ea) * (pa[i] - ea) / ea + (pb[i] - eb) * (pb[i] - eb) / eb;
    }
    const boost::math::chi_squared dist(static_cast<double>(pa.size() - 1));
    return boost::math::cdf(boost::math::complement(dist, stat));
}

inline double poisson_pmf(double mean, long long k)
{
    return std::exp(-mean + static_cast<double>(k) * std::log(mean) - std::lgamma(static_cast<double>(k) + 1.0));
}

/// Slope of log2(values) against index, fitted over [first, values.size()).
inline double log2_slope(const std::vector<double>& values, std::size_t first)
{
    double sx = 0, sy = 0, sxx = 0, sxy = 0, n = 0;
    for (std::size_t i = first; i < values.size(); ++i) {
        const double x = static_cast<double>(i);
        const double y = std::log2(values[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        n += 1;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace mlmc::testing
