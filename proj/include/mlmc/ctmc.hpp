#pragma once

// Tau-leaping for continuous-time Markov chains (reaction networks) with the
// Poisson coupling of fine and coarse chains, plus Gillespie's direct method
// as an exact reference.
//
// Within one coarse step of size 2h the coarse rates stay frozen at the
// coarse state from the start of the step, while the fine chain recomputes
// its rates after each sub-step of size h. For each reaction and sub-step,
// P1 ~ Poisson(h min(lf, lc)) goes to both chains and P2 ~ Poisson(h |lf - lc|)
// goes to the chain with the larger rate only. Poisson additivity makes each
// chain's marginal law exactly plain tau-leaping at its own step size.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "mlmc/error.hpp"
#include "mlmc/random.hpp"
#include "mlmc/sde.hpp"
#include "mlmc/statistics.hpp"

namespace mlmc {

using ChainState = std::vector<std::int64_t>;

struct Reaction {
    std::function<double(std::span<const std::int64_t>)> propensity;
    std::vector<std::int64_t> change;

    /// Mass-action propensity rate * prod_i x_i (x_i - 1) ... (x_i - r_i + 1).
    static Reaction mass_action(double rate, std::vector<int> reactants, std::vector<std::int64_t> change)
    {
        if (reactants.size() != change.size())
            throw BadInput("mass_action: reactant and change vectors differ in length");
        auto prop = [rate, reactants = std::move(reactants)](std::span<const std::int64_t> x) {
            double a = rate;
            for (std::size_t i = 0; i < reactants.size(); ++i)
                for (int k = 0; k < reactants[i]; ++k)
                    a *= static_cast<double>(x[i] - k);
            return a;
        };
        return {std::move(prop), std::move(change)};
    }
};

struct CtmcModel {
    std::vector<Reaction> reactions;
    ChainState x0;
    double horizon = 1.0;
    int steps0 = 1;

    void validate() const
    {
        if (!(horizon > 0.0))
            throw BadInput("CtmcModel: horizon must be positive");
        if (steps0 < 1)
            throw BadInput("CtmcModel: steps0 must be at least 1");
        if (x0.empty())
            throw BadInput("CtmcModel: initial state must have at least one species");
        for (const auto& r : reactions) {
            if (!r.propensity)
                throw BadInput("CtmcModel: reaction without propensity");
            if (r.change.size() != x0.size())
                throw BadInput("CtmcModel: state-change vector does not match the state dimension");
        }
    }
};

struct CoupledChainState {
    ChainState fine;
    ChainState coarse;
    double time = 0.0;
};

namespace detail {

/// Evaluates a propensity, clamping negative values to zero and counting them.
inline double clamped_rate(const Reaction& r, const ChainState& x, std::int64_t* clamp_count)
{
    const double a = r.propensity(x);
    if (a < 0.0) {
        if (clamp_count)
            ++*clamp_count;
        return 0.0;
    }
    if (!std::isfinite(a))
        throw NonFinite("ctmc: non-finite propensity");
    return a;
}

inline void apply(ChainState& x, const std::vector<std::int64_t>& change, std::int64_t count)
{
    if (count == 0)
        return;
    for (std::size_t i = 0; i < x.size(); ++i)
        x[i] += count * change[i];
}

}  // namespace detail

/// Advances the fine chain two steps of size h and the coarse chain one step
/// of size 2h.
inline CoupledChainState coupled_tau_leap_pair(const CtmcModel& model, CoupledChainState state, double h,
                                               CounterStream& stream, std::int64_t* clamp_count = nullptr)
{
    if (!(h > 0.0))
        throw BadInput("coupled_tau_leap_pair: h must be positive");
    const std::size_t nr = model.reactions.size();
    std::vector<double> coarse_rate(nr);
    for (std::size_t r = 0; r < nr; ++r)
        coarse_rate[r] = detail::clamped_rate(model.reactions[r], state.coarse, clamp_count);

    for (int sub = 0; sub < 2; ++sub) {
        std::vector<double> fine_rate(nr);
        for (std::size_t r = 0; r < nr; ++r)
            fine_rate[r] = detail::clamped_rate(model.reactions[r], state.fine, clamp_count);
        for (std::size_t r = 0; r < nr; ++r) {
            const double lf = fine_rate[r];
            const double lc = coarse_rate[r];
            const std::int64_t shared = poisson(stream, h * std::min(lf, lc));
            const std::int64_t extra = poisson(stream, h * std::abs(lf - lc));
            const auto& nu = model.reactions[r].change;
            detail::apply(state.fine, nu, shared + (lf > lc ? extra : 0));
            detail::apply(state.coarse, nu, shared + (lf > lc ? 0 : extra));
        }
    }
    state.time += 2.0 * h;
    return state;
}

inline CoupledChainState coupled_tau_leap_pair(const CtmcModel& model, CoupledChainState state, double h,
                                               const StreamKey& key, std::int64_t* clamp_count = nullptr)
{
    CounterStream stream(key.with_substream(substream::kTauLeap));
    return coupled_tau_leap_pair(model, std::move(state), h, stream, clamp_count);
}

/// Plain tau-leaping x_{n+1} = x_n + sum_r P(h lambda_r(x_n)) nu_r over `steps` steps.
inline ChainState tau_leap_simulate(const CtmcModel& model, double h, std::int64_t steps, CounterStream& stream,
                                    std::int64_t* clamp_count = nullptr)
{
    if (!(h > 0.0))
        throw BadInput("tau_leap_simulate: h must be positive");
    ChainState x = model.x0;
    std::vector<double> rate(model.reactions.size());
    for (std::int64_t n = 0; n < steps; ++n) {
        for (std::size_t r = 0; r < rate.size(); ++r)
            rate[r] = detail::clamped_rate(model.reactions[r], x, clamp_count);
        for (std::size_t r = 0; r < rate.size(); ++r)
            detail::apply(x, model.reactions[r].change, poisson(stream, h * rate[r]));
    }
    return x;
}

struct CoupledChainResult {
    ChainState fine_terminal;
    /// Empty on level 0.
    ChainState coarse_terminal;
    double cost = 0.0;
    std::int64_t clamped = 0;
};

/// Full-horizon coupled trajectory on level l (fine step T / (2^l steps0)).
inline CoupledChainResult simulate_coupled_ctmc(const CtmcModel& model, int level, const StreamKey& key)
{
    if (level < 0)
        throw BadInput("simulate_coupled_ctmc: level must be non-negative");
    const std::int64_t fine_steps = int_pow(2, level) * model.steps0;
    const double h = model.horizon / static_cast<double>(fine_steps);
    const double reactions = static_cast<double>(std::max<std::size_t>(1, model.reactions.size()));
    CounterStream stream(key.with_substream(substream::kTauLeap));

    CoupledChainResult out;
    if (level == 0) {
        out.fine_terminal = tau_leap_simulate(model, h, fine_steps, stream, &out.clamped);
        out.cost = static_cast<double>(fine_steps) * reactions;
        return out;
    }
    CoupledChainState st{model.x0, model.x0, 0.0};
    for (std::int64_t n = 0; n < fine_steps / 2; ++n)
        st = coupled_tau_leap_pair(model, std::move(st), h, stream, &out.clamped);
    out.fine_terminal = std::move(st.fine);
    out.coarse_terminal = std::move(st.coarse);
    out.cost = static_cast<double>(fine_steps + fine_steps / 2) * reactions;
    return out;
}

inline constexpr std::int64_t kSsaEventCap = 10'000'000;

struct SsaResult {
    ChainState terminal;
    std::int64_t events = 0;
    /// Holding times between consecutive events (only when requested).
    std::vector<double> holding_times;
};

/// Gillespie's direct method up to the horizon.
inline SsaResult ssa_simulate(const CtmcModel& model, const StreamKey& key, bool record_holding_times = false,
                              std::int64_t event_cap = kSsaEventCap)
{
    CounterStream stream(key.with_substream(substream::kTauLeap));
    SsaResult out;
    out.terminal = model.x0;
    std::vector<double> rate(model.reactions.size());
    double t = 0.0;
    for (;;) {
        double total = 0.0;
        for (std::size_t r = 0; r < rate.size(); ++r) {
            rate[r] = detail::clamped_rate(model.reactions[r], out.terminal, nullptr);
            total += rate[r];
        }
        if (!(total > 0.0))
            break;
        const double dt = -std::log(stream.uniform()) / total;
        if (t + dt > model.horizon)
            break;
        t += dt;
        if (record_holding_times)
            out.holding_times.push_back(dt);
        const double pick = stream.uniform() * total;
        std::size_t r = 0;
        double acc = rate[0];
        while (acc < pick && r + 1 < rate.size())
            acc += rate[++r];
        detail::apply(out.terminal, model.reactions[r].change, 1);
        if (++out.events > event_cap)
            throw EventCapExceeded("ssa_simulate: more than " + std::to_string(event_cap) + " events");
    }
    return out;
}

}  // namespace mlmc
