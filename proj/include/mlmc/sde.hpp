#pragma once

// Coupled fine/coarse simulation of scalar SDEs dX = a(X) dt + b(X) dW.
//
// On level l the fine path takes M^l * steps0 steps of size h_f = T / (M^l steps0);
// the coarse path (l > 0) takes steps of size M h_f driven by the M-wise sums
// of the same Brownian increments.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mlmc/error.hpp"
#include "mlmc/random.hpp"
#include "mlmc/statistics.hpp"

namespace mlmc {

/// Substreams used inside one sample key.
namespace substream {
inline constexpr std::uint32_t kIncrements = 0;
inline constexpr std::uint32_t kBridge = 1;
inline constexpr std::uint32_t kSplitting = 2;
inline constexpr std::uint32_t kChangeOfMeasure = 3;
inline constexpr std::uint32_t kTauLeap = 4;
}  // namespace substream

enum class SchemeKind { EulerMaruyama, Milstein };

inline const char* to_string(SchemeKind s)
{
    return s == SchemeKind::EulerMaruyama ? "euler" : "milstein";
}

struct SdeModel {
    std::function<double(double)> drift;
    std::function<double(double)> diffusion;
    /// b'(x); required by the Milstein scheme.
    std::function<double(double)> diffusion_derivative;
    double x0 = 0.0;
    double horizon = 1.0;
    int steps0 = 1;

    /// Checks T > 0, steps0 >= 1 and, when present, that b' agrees with a
    /// central difference of b at x0 to 1e-4 relative.
    void validate() const
    {
        if (!drift || !diffusion)
            throw BadInput("SdeModel: drift and diffusion are required");
        if (!(horizon > 0.0))
            throw BadInput("SdeModel: horizon must be positive");
        if (steps0 < 1)
            throw BadInput("SdeModel: steps0 must be at least 1");
        if (diffusion_derivative) {
            const double h = 1e-5 * std::max(1.0, std::abs(x0));
            const double fd = (diffusion(x0 + h) - diffusion(x0 - h)) / (2.0 * h);
            const double given = diffusion_derivative(x0);
            if (std::abs(fd - given) > 1e-4 * std::max(1.0, std::abs(given)))
                throw BadInput("SdeModel: diffusion_derivative is inconsistent with diffusion at x0");
        }
    }

    /// Geometric Brownian motion dS = r S dt + sigma S dW.
    static SdeModel gbm(double s0, double rate, double sigma, double horizon, int steps0 = 1)
    {
        return {[rate](double x) { return rate * x; }, [sigma](double x) { return sigma * x; },
                [sigma](double) { return sigma; }, s0, horizon, steps0};
    }
};

/// One step of the chosen scheme: Euler x + a h + b dW, Milstein adds
/// b b' (dW^2 - h) / 2.
inline double step(SchemeKind scheme, const SdeModel& model, double x, double h, double dw)
{
    if (!(h > 0.0))
        throw BadInput("step: h must be positive");
    const double b = model.diffusion(x);
    double next = x + model.drift(x) * h + b * dw;
    if (scheme == SchemeKind::Milstein) {
        if (!model.diffusion_derivative)
            throw BadInput("step: Milstein needs the diffusion derivative");
        next += 0.5 * b * model.diffusion_derivative(x) * (dw * dw - h);
    }
    if (!std::isfinite(next))
        throw NonFinite("step: non-finite state (model blow-up)");
    return next;
}

inline std::int64_t int_pow(std::int64_t base, int exp)
{
    std::int64_t r = 1;
    for (int i = 0; i < exp; ++i)
        r *= base;
    return r;
}

struct CoupledPath {
    std::vector<double> fine_values;
    /// Empty on level 0.
    std::vector<double> coarse_values;
    std::vector<double> fine_increments;
    int level = 0;
    int ratio = 2;
    double h_fine = 0.0;
    double h_coarse = 0.0;

    bool has_coarse() const { return !coarse_values.empty(); }
    std::size_t fine_steps() const { return fine_increments.size(); }
    std::size_t coarse_steps() const { return has_coarse() ? coarse_values.size() - 1 : 0; }
};

/// Accounted cost of one natural correction sample: fine plus coarse steps.
inline double coupled_path_cost(int level, int ratio, int steps0)
{
    const double fine = static_cast<double>(int_pow(ratio, level) * steps0);
    return level == 0 ? fine : fine * (1.0 + 1.0 / ratio);
}

inline std::vector<double> integrate_path(SchemeKind scheme, const SdeModel& model, double h,
                                          std::span<const double> increments)
{
    std::vector<double> x(increments.size() + 1);
    x[0] = model.x0;
    for (std::size_t n = 0; n < increments.size(); ++n)
        x[n + 1] = step(scheme, model, x[n], h, increments[n]);
    return x;
}

/// Builds the coupled path pair from given fine increments.
inline CoupledPath simulate_coupled_from_increments(const SdeModel& model, SchemeKind scheme, int level,
                                                    int ratio, std::vector<double> fine_increments)
{
    if (level < 0)
        throw BadInput("simulate_coupled: level must be non-negative");
    const std::int64_t n_fine = int_pow(ratio, level) * model.steps0;
    if (static_cast<std::int64_t>(fine_increments.size()) != n_fine)
        throw BadInput("simulate_coupled: wrong number of increments for level " + std::to_string(level));

    CoupledPath p;
    p.level = level;
    p.ratio = ratio;
    p.h_fine = model.horizon / static_cast<double>(n_fine);
    p.h_coarse = level > 0 ? p.h_fine * ratio : 0.0;
    try {
        p.fine_values = integrate_path(scheme, model, p.h_fine, fine_increments);
        if (level > 0)
            p.coarse_values = integrate_path(scheme, model, p.h_coarse, coarsen_increments(fine_increments, ratio));
    } catch (const NonFinite& e) {
        throw NonFinite(std::string(e.what()) + " on level " + std::to_string(level));
    }
    p.fine_increments = std::move(fine_increments);
    return p;
}

/// Draws N(0, h_f) increments from the key and simulates the coupled pair.
inline CoupledPath simulate_coupled(const SdeModel& model, SchemeKind scheme, int level, int ratio,
                                    const StreamKey& key)
{
    if (level < 0)
        throw BadInput("simulate_coupled: level must be non-negative");
    const std::int64_t n_fine = int_pow(ratio, level) * model.steps0;
    const double sqrt_h = std::sqrt(model.horizon / static_cast<double>(n_fine));
    std::vector<double> dw(static_cast<std::size_t>(n_fine));
    CounterStream stream(key.with_substream(substream::kIncrements));
    for (double& w : dw)
        w = sqrt_h * stream.normal();
    return simulate_coupled_from_increments(model, scheme, level, ratio, std::move(dw));
}

/// Reverses the order of the increments inside each block of `ratio`; the
/// block sums, and therefore the coarse path, are unchanged.
inline std::vector<double> antithetic_increments(std::span<const double> fine, int ratio)
{
    if (ratio < 1 || fine.size() % static_cast<std::size_t>(ratio) != 0)
        throw BadInput("antithetic_increments: length must be divisible by the ratio");
    std::vector<double> out(fine.begin(), fine.end());
    for (std::size_t j = 0; j < out.size(); j += static_cast<std::size_t>(ratio))
        std::reverse(out.begin() + static_cast<std::ptrdiff_t>(j),
                     out.begin() + static_cast<std::ptrdiff_t>(j) + ratio);
    return out;
}

/// Antithetic correction (P_f(w) + P_f(w^a)) / 2 - P_c(w), where w^a swaps the
/// fine increments inside every coarse step. `payoff` maps a CoupledPath to a
/// pair with `.fine` and `.coarse` members. The returned `fine` is the averaged
/// fine payoff; the cost counts both fine paths and the coarse path.
template <class Payoff>
LevelSample antithetic_correction_sample(const SdeModel& model, SchemeKind scheme, int level, int ratio,
                                         const StreamKey& key, const Payoff& payoff)
{
    if (level < 1)
        throw BadInput("antithetic_correction_sample: level must be at least 1");
    const CoupledPath path = simulate_coupled(model, scheme, level, ratio, key);
    const CoupledPath anti = simulate_coupled_from_increments(
        model, scheme, level, ratio, antithetic_increments(path.fine_increments, ratio));
    const auto p = payoff(path);
    const auto pa = payoff(anti);
    const double fine_mean = 0.5 * (p.fine + pa.fine);
    const double cost = 2.0 * static_cast<double>(path.fine_steps()) + static_cast<double>(path.coarse_steps());
    return {fine_mean - p.coarse, fine_mean, cost};
}

}  // namespace mlmc
