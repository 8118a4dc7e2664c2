#pragma once

// Level samplers that plug the path simulators into the driver.

#include <cmath>
#include <cstdint>
#include <vector>

#include "mlmc/batch.hpp"
#include "mlmc/ctmc.hpp"
#include "mlmc/payoffs.hpp"
#include "mlmc/sde.hpp"

namespace mlmc {

enum class EstimatorKind { Natural, Antithetic };

/// Y_l = P_f - P_c for one payoff on coupled SDE paths.
struct SdeSampler {
    SdeModel model;
    SchemeKind scheme = SchemeKind::Milstein;
    PayoffSpec payoff;
    int ratio = 2;
    EstimatorKind estimator = EstimatorKind::Natural;

    LevelSample operator()(const StreamKey& key) const
    {
        const int level = static_cast<int>(key.level);
        if (estimator == EstimatorKind::Antithetic && level > 0) {
            return antithetic_correction_sample(model, scheme, level, ratio, key, [&](const CoupledPath& p) {
                return evaluate_pair(p, payoff, model, key);
            });
        }
        const CoupledPath path = simulate_coupled(model, scheme, level, ratio, key);
        const PayoffPair p = evaluate_pair(path, payoff, model, key);
        return {p.fine - p.coarse, p.fine, coupled_path_cost(level, ratio, model.steps0)};
    }
};

/// Several payoffs evaluated on the same coupled paths.
struct SdeMultiSampler {
    SdeModel model;
    SchemeKind scheme = SchemeKind::Milstein;
    std::vector<PayoffSpec> payoffs;
    int ratio = 2;

    MultiLevelSample operator()(const StreamKey& key) const
    {
        const int level = static_cast<int>(key.level);
        const CoupledPath path = simulate_coupled(model, scheme, level, ratio, key);
        MultiLevelSample s;
        s.cost = coupled_path_cost(level, ratio, model.steps0);
        for (const auto& spec : payoffs) {
            const PayoffPair p = evaluate_pair(path, spec, model, key);
            s.corrections.push_back(p.fine - p.coarse);
            s.fines.push_back(p.fine);
        }
        return s;
    }
};

/// Y_l = X_f(T) - X_c(T) for one species of a tau-leaped chain.
struct CtmcSampler {
    CtmcModel model;
    std::size_t output = 0;

    LevelSample operator()(const StreamKey& key) const
    {
        const CoupledChainResult r = simulate_coupled_ctmc(model, static_cast<int>(key.level), key);
        const double fine = static_cast<double>(r.fine_terminal[output]);
        const double coarse = r.coarse_terminal.empty() ? 0.0 : static_cast<double>(r.coarse_terminal[output]);
        return {fine - coarse, fine, r.cost};
    }
};

/// Deterministic corrections Y_0 = 1, Y_l = 2^-l with unit cost, for
/// exercising the driver without sampling noise.
struct ZeroVarianceSampler {
    LevelSample operator()(const StreamKey& key) const
    {
        const double y = std::ldexp(1.0, -static_cast<int>(key.level));
        return {y, y, 1.0};
    }
};

/// Synthetic corrections with E[Y_l] = 2^{-alpha l}, Var[Y_l] = 2^{-beta l}
/// and cost 2^{gamma l} (level 0: mean 1, variance 1, cost 1).
struct SyntheticRateSampler {
    double alpha = 1.0;
    double beta = 2.0;
    double gamma = 1.0;

    LevelSample operator()(const StreamKey& key) const
    {
        const double l = static_cast<double>(key.level);
        const double z = CounterStream(key).normal();
        const double y = std::exp2(-alpha * l) + std::exp2(-0.5 * beta * l) * z;
        return {y, y, std::exp2(gamma * l)};
    }
};

}  // namespace mlmc
