#pragma once

// Coupled payoff evaluation (P_f on the fine path, P_c on the coarse path).
//
// The estimators differ slightly between the two paths where that tightens the
// coupling, but always keep E[P_f on level l] = E[P_c on level l + 1]: the
// coarse treatment of a step of size h is equal in law to the fine treatment
// of a step of the same size.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "mlmc/error.hpp"
#include "mlmc/random.hpp"
#include "mlmc/sde.hpp"

namespace mlmc {

enum class PayoffKind { European, Asian, Lookback, Barrier, Digital };

enum class DigitalSmoothing { None, CondExp, Splitting, ChangeOfMeasure };

inline const char* to_string(PayoffKind k)
{
    switch (k) {
    case PayoffKind::European: return "european";
    case PayoffKind::Asian: return "asian";
    case PayoffKind::Lookback: return "lookback";
    case PayoffKind::Barrier: return "barrier";
    case PayoffKind::Digital: return "digital";
    }
    return "?";
}

inline const char* to_string(DigitalSmoothing s)
{
    switch (s) {
    case DigitalSmoothing::None: return "none";
    case DigitalSmoothing::CondExp: return "condexp";
    case DigitalSmoothing::Splitting: return "splitting";
    case DigitalSmoothing::ChangeOfMeasure: return "change-of-measure";
    }
    return "?";
}

struct PayoffSpec {
    PayoffKind kind = PayoffKind::European;
    double strike = 100.0;
    /// Down-and-out level for PayoffKind::Barrier.
    double barrier = 0.0;
    DigitalSmoothing smoothing = DigitalSmoothing::None;
    int subsamples = 10;
    double discount = 1.0;

    void validate(double x0) const
    {
        if (kind != PayoffKind::Lookback && !(strike > 0.0))
            throw BadInput("PayoffSpec: strike must be positive");
        if (kind == PayoffKind::Barrier && !(barrier < x0))
            throw BadInput("PayoffSpec: down-and-out barrier must lie below the initial value");
        if (subsamples < 1)
            throw BadInput("PayoffSpec: subsamples must be at least 1");
        if (!(discount > 0.0) || !std::isfinite(discount))
            throw BadInput("PayoffSpec: discount must be positive");
    }
};

struct PayoffPair {
    double fine = 0.0;
    /// 0 on level 0, where has_coarse is false.
    double coarse = 0.0;
    bool has_coarse = false;
};

//---------------------------------------------------------------------------//
// Brownian bridge helpers
//---------------------------------------------------------------------------//

/// Draws the minimum over a step of a Brownian bridge with volatility b from
/// x_left to x_right over time h, by inverting
/// P(min < y) = exp(-2 (x_left - y)(x_right - y) / (b^2 h)).
/// With b == 0 the path is a straight line and min(x_left, x_right) is returned.
inline double bridge_minimum_sample(double x_left, double x_right, double b, double h, double u)
{
    if (b == 0.0 || u >= 1.0)
        return std::min(x_left, x_right);
    const double d = x_right - x_left;
    return 0.5 * (x_left + x_right - std::sqrt(d * d - 2.0 * b * b * h * std::log(u)));
}

/// Probability that a Brownian bridge with volatility b from x_left to
/// x_right over time h touches the level B. With b == 0 only the endpoints
/// count.
inline double bridge_crossing_probability(double x_left, double x_right, double barrier, double b, double h)
{
    if (x_left <= barrier || x_right <= barrier)
        return 1.0;
    if (b == 0.0)
        return 0.0;
    return std::exp(-2.0 * (x_left - barrier) * (x_right - barrier) / (b * b * h));
}

/// Midpoint of the coarse-step Brownian interpolant, given the two fine
/// increments that make up the coarse increment.
inline double coarse_midpoint(double x_n, double x_np1, double b_c, double dw_first, double dw_second)
{
    return 0.5 * (x_n + x_np1) + 0.5 * b_c * (dw_first - dw_second);
}

/// Points of the coarse-step interpolant x_n + (t/h)(x_np1 - x_n) + b_c (W_t - (t/h) W_h)
/// at the fine sub-grid, given the fine increments inside the coarse step.
/// Returns ratio + 1 values from x_n to x_np1; for ratio 2 the middle value
/// equals coarse_midpoint.
inline std::vector<double> coarse_substep_points(double x_n, double x_np1, double b_c,
                                                 std::span<const double> fine_dw)
{
    const std::size_t m = fine_dw.size();
    double total = 0.0;
    for (double w : fine_dw)
        total += w;
    std::vector<double> pts(m + 1);
    pts[0] = x_n;
    pts[m] = x_np1;
    double partial = 0.0;
    for (std::size_t k = 1; k < m; ++k) {
        partial += fine_dw[k - 1];
        const double frac = static_cast<double>(k) / static_cast<double>(m);
        pts[k] = x_n + frac * (x_np1 - x_n) + b_c * (partial - frac * total);
    }
    return pts;
}

//---------------------------------------------------------------------------//
// Path payoffs
//---------------------------------------------------------------------------//

namespace detail {

inline double call(double s, double k)
{
    return std::max(s - k, 0.0);
}

inline double trapezoid_average(std::span<const double> x)
{
    double s = 0.5 * (x.front() + x.back());
    for (std::size_t i = 1; i + 1 < x.size(); ++i)
        s += x[i];
    return s / static_cast<double>(x.size() - 1);
}

inline std::vector<double> bridge_uniforms(const StreamKey& key, std::size_t n)
{
    std::vector<double> u(n);
    CounterStream stream(key.with_substream(substream::kBridge));
    for (double& v : u)
        v = stream.uniform();
    return u;
}

/// Walks every fine step of the fine path, and every fine sub-step of the
/// refined coarse path, calling visit(x_left, x_right, b, h, fine_index).
template <class FineVisit, class CoarseVisit>
void for_each_bridge_step(const CoupledPath& path, const SdeModel& model, FineVisit&& fine_visit,
                          CoarseVisit&& coarse_visit)
{
    const auto& xf = path.fine_values;
    for (std::size_t n = 0; n + 1 < xf.size(); ++n)
        fine_visit(xf[n], xf[n + 1], model.diffusion(xf[n]), path.h_fine, n);
    if (!path.has_coarse())
        return;
    const auto& xc = path.coarse_values;
    const auto m = static_cast<std::size_t>(path.ratio);
    for (std::size_t k = 0; k + 1 < xc.size(); ++k) {
        const double b_c = model.diffusion(xc[k]);
        const auto pts = coarse_substep_points(
            xc[k], xc[k + 1], b_c, std::span<const double>(path.fine_increments).subspan(k * m, m));
        for (std::size_t j = 0; j < m; ++j)
            coarse_visit(pts[j], pts[j + 1], b_c, path.h_fine, k * m + j);
    }
}

}  // namespace detail

inline PayoffPair pair_european(const CoupledPath& path, const PayoffSpec& spec)
{
    PayoffPair p;
    p.fine = spec.discount * detail::call(path.fine_values.back(), spec.strike);
    if (path.has_coarse()) {
        p.coarse = spec.discount * detail::call(path.coarse_values.back(), spec.strike);
        p.has_coarse = true;
    }
    return p;
}

inline PayoffPair pair_asian(const CoupledPath& path, const PayoffSpec& spec)
{
    PayoffPair p;
    p.fine = spec.discount * detail::call(detail::trapezoid_average(path.fine_values), spec.strike);
    if (path.has_coarse()) {
        p.coarse = spec.discount * detail::call(detail::trapezoid_average(path.coarse_values), spec.strike);
        p.has_coarse = true;
    }
    return p;
}

/// Floating-strike lookback S_T - min_t S_t, with per-step bridge minima.
/// The coarse path uses the same uniforms as the fine steps covering it.
inline PayoffPair pair_lookback(const CoupledPath& path, const PayoffSpec& spec, const SdeModel& model,
                                const StreamKey& key)
{
    const auto u = detail::bridge_uniforms(key, path.fine_steps());
    double min_f = std::numeric_limits<double>::infinity();
    double min_c = std::numeric_limits<double>::infinity();
    detail::for_each_bridge_step(
        path, model,
        [&](double xl, double xr, double b, double h, std::size_t n) {
            min_f = std::min(min_f, bridge_minimum_sample(xl, xr, b, h, u[n]));
        },
        [&](double xl, double xr, double b, double h, std::size_t n) {
            min_c = std::min(min_c, bridge_minimum_sample(xl, xr, b, h, u[n]));
        });
    PayoffPair p;
    p.fine = spec.discount * (path.fine_values.back() - min_f);
    if (path.has_coarse()) {
        p.coarse = spec.discount * (path.coarse_values.back() - min_c);
        p.has_coarse = true;
    }
    return p;
}

/// Down-and-out call (S_T - K)^+ times the bridge survival probability of
/// every step. The survival weight is the conditional expectation of the
/// knock-out indicator, so no extra randomness is drawn.
inline PayoffPair pair_barrier(const CoupledPath& path, const PayoffSpec& spec, const SdeModel& model)
{
    double surv_f = 1.0;
    double surv_c = 1.0;
    detail::for_each_bridge_step(
        path, model,
        [&](double xl, double xr, double b, double h, std::size_t) {
            surv_f *= 1.0 - bridge_crossing_probability(xl, xr, spec.barrier, b, h);
        },
        [&](double xl, double xr, double b, double h, std::size_t) {
            surv_c *= 1.0 - bridge_crossing_probability(xl, xr, spec.barrier, b, h);
        });
    PayoffPair p;
    p.fine = spec.discount * detail::call(path.fine_values.back(), spec.strike) * surv_f;
    if (path.has_coarse()) {
        p.coarse = spec.discount * detail::call(path.coarse_values.back(), spec.strike) * surv_c;
        p.has_coarse = true;
    }
    return p;
}

//---------------------------------------------------------------------------//
// Digital payoff 1{S_T > K}
//---------------------------------------------------------------------------//

/// Unsmoothed indicator on both paths.
inline PayoffPair pair_digital_raw(const CoupledPath& path, const PayoffSpec& spec)
{
    PayoffPair p;
    p.fine = path.fine_values.back() > spec.strike ? spec.discount : 0.0;
    if (path.has_coarse()) {
        p.coarse = path.coarse_values.back() > spec.strike ? spec.discount : 0.0;
        p.has_coarse = true;
    }
    return p;
}

/// Gaussian laws of S_T under an Euler final step, conditional on everything
/// but the last fine increment. The fine path steps from S(T - h_f); the
/// coarse path steps from S(T - h_c) and already knows the first M - 1 fine
/// increments of its final step, leaving variance b^2 h_f in both cases.
struct FinalStepLaws {
    GaussianSpec fine;
    GaussianSpec coarse;
    bool has_coarse = false;
};

inline FinalStepLaws final_step_laws(const CoupledPath& path, const SdeModel& model)
{
    FinalStepLaws laws;
    const auto& xf = path.fine_values;
    const double s = xf[xf.size() - 2];
    laws.fine = {s + model.drift(s) * path.h_fine, std::abs(model.diffusion(s)) * std::sqrt(path.h_fine)};
    if (path.has_coarse()) {
        const auto& xc = path.coarse_values;
        const double sc = xc[xc.size() - 2];
        const double bc = model.diffusion(sc);
        const std::size_t n = path.fine_steps();
        double known_dw = 0.0;
        for (std::size_t i = n - static_cast<std::size_t>(path.ratio); i + 1 < n; ++i)
            known_dw += path.fine_increments[i];
        laws.coarse = {sc + model.drift(sc) * path.h_coarse + bc * known_dw, std::abs(bc) * std::sqrt(path.h_fine)};
        laws.has_coarse = true;
    }
    return laws;
}

namespace detail {

inline double digital_probability(const GaussianSpec& law, double strike)
{
    if (law.std == 0.0)
        return law.mean > strike ? 1.0 : 0.0;
    return normal_cdf((law.mean - strike) / law.std);
}

}  // namespace detail

/// Analytic conditional expectation of the digital given the path up to one
/// fine step before maturity.
inline PayoffPair pair_digital_condexp(const CoupledPath& path, const PayoffSpec& spec, const SdeModel& model)
{
    const FinalStepLaws laws = final_step_laws(path, model);
    PayoffPair p;
    p.fine = spec.discount * detail::digital_probability(laws.fine, spec.strike);
    if (laws.has_coarse) {
        p.coarse = spec.discount * detail::digital_probability(laws.coarse, spec.strike);
        p.has_coarse = true;
    }
    return p;
}

/// Splitting: average the indicator over `subsamples` final increments. Both
/// paths use the same normals Z_j; the final step is Milstein when the model
/// provides b'.
inline PayoffPair pair_digital_splitting(const CoupledPath& path, const PayoffSpec& spec, const SdeModel& model,
                                         const StreamKey& key)
{
    const SchemeKind final_scheme =
        model.diffusion_derivative ? SchemeKind::Milstein : SchemeKind::EulerMaruyama;
    const int d = spec.subsamples;
    CounterStream stream(key.with_substream(substream::kSplitting));
    const double sqrt_hf = std::sqrt(path.h_fine);

    const auto& xf = path.fine_values;
    const double s = xf[xf.size() - 2];
    double sc = 0.0;
    double known_dw = 0.0;
    if (path.has_coarse()) {
        sc = path.coarse_values[path.coarse_values.size() - 2];
        const std::size_t n = path.fine_steps();
        for (std::size_t i = n - static_cast<std::size_t>(path.ratio); i + 1 < n; ++i)
            known_dw += path.fine_increments[i];
    }

    int hits_f = 0;
    int hits_c = 0;
    for (int j = 0; j < d; ++j) {
        const double dw = sqrt_hf * stream.normal();
        if (step(final_scheme, model, s, path.h_fine, dw) > spec.strike)
            ++hits_f;
        if (path.has_coarse() && step(final_scheme, model, sc, path.h_coarse, known_dw + dw) > spec.strike)
            ++hits_c;
    }
    PayoffPair p;
    p.fine = spec.discount * hits_f / d;
    if (path.has_coarse()) {
        p.coarse = spec.discount * hits_c / d;
        p.has_coarse = true;
    }
    return p;
}

/// Change of measure: draw one S_T from the average of the fine and coarse
/// final-step laws and weight the indicator by each path's density ratio.
inline PayoffPair pair_digital_change_of_measure(const CoupledPath& path, const PayoffSpec& spec,
                                                 const SdeModel& model, const StreamKey& key)
{
    const FinalStepLaws laws = final_step_laws(path, model);
    GaussianSpec mix = laws.fine;
    if (laws.has_coarse) {
        mix.mean = 0.5 * (laws.fine.mean + laws.coarse.mean);
        mix.std = std::sqrt(0.5 * (laws.fine.std * laws.fine.std + laws.coarse.std * laws.coarse.std));
    }

    PayoffPair p;
    p.has_coarse = laws.has_coarse;
    if (mix.std == 0.0) {
        p.fine = spec.discount * detail::digital_probability(laws.fine, spec.strike);
        if (laws.has_coarse)
            p.coarse = spec.discount * detail::digital_probability(laws.coarse, spec.strike);
        return p;
    }

    CounterStream stream(key.with_substream(substream::kChangeOfMeasure));
    const double z = mix.mean + mix.std * stream.normal();
    const double mix_density = normal_pdf(z, mix.mean, mix.std);
    auto weighted = [&](const GaussianSpec& law) {
        if (law.std == 0.0)
            return detail::digital_probability(law, spec.strike);
        return z > spec.strike ? normal_pdf(z, law.mean, law.std) / mix_density : 0.0;
    };
    p.fine = spec.discount * weighted(laws.fine);
    if (laws.has_coarse)
        p.coarse = spec.discount * weighted(laws.coarse);
    return p;
}

/// Dispatches on spec.kind / spec.smoothing.
inline PayoffPair evaluate_pair(const CoupledPath& path, const PayoffSpec& spec, const SdeModel& model,
                                const StreamKey& key)
{
    switch (spec.kind) {
    case PayoffKind::European: return pair_european(path, spec);
    case PayoffKind::Asian: return pair_asian(path, spec);
    case PayoffKind::Lookback: return pair_lookback(path, spec, model, key);
    case PayoffKind::Barrier: return pair_barrier(path, spec, model);
    case PayoffKind::Digital:
        switch (spec.smoothing) {
        case DigitalSmoothing::None: return pair_digital_raw(path, spec);
        case DigitalSmoothing::CondExp: return pair_digital_condexp(path, spec, model);
        case DigitalSmoothing::Splitting: return pair_digital_splitting(path, spec, model, key);
        case DigitalSmoothing::ChangeOfMeasure: return pair_digital_change_of_measure(path, spec, model, key);
        }
    }
    throw BadInput("evaluate_pair: unknown payoff");
}

//---------------------------------------------------------------------------//
// Closed forms for GBM (used as oracles)
//---------------------------------------------------------------------------//

inline double black_scholes_call(double s0, double strike, double rate, double sigma, double horizon)
{
    const double sd = sigma * std::sqrt(horizon);
    const double d1 = (std::log(s0 / strike) + (rate + 0.5 * sigma * sigma) * horizon) / sd;
    return s0 * normal_cdf(d1) - strike * std::exp(-rate * horizon) * normal_cdf(d1 - sd);
}

inline double black_scholes_digital(double s0, double strike, double rate, double sigma, double horizon)
{
    const double sd = sigma * std::sqrt(horizon);
    const double d2 = (std::log(s0 / strike) + (rate - 0.5 * sigma * sigma) * horizon) / sd;
    return std::exp(-rate * horizon) * normal_cdf(d2);
}

}  // namespace mlmc
