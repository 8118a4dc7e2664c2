#pragma once

// The three experiment commands behind the `mlmc` tool: an adaptive run, a
// fixed-sample rate study, and a cost-versus-accuracy sweep. Each returns its
// results and writes CSV files; nothing here touches stdout.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "mlmc/config.hpp"
#include "mlmc/driver.hpp"
#include "mlmc/rates.hpp"
#include "mlmc/samplers.hpp"

namespace mlmc {

struct CommandOptions {
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    int workers = 1;
};

//---------------------------------------------------------------------------//
// CSV
//---------------------------------------------------------------------------//

/// Shortest round-trip decimal form; independent of the C and C++ locales.
inline std::string format_number(double v)
{
    if (std::isnan(v))
        return "nan";
    if (std::isinf(v))
        return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline std::string format_number(std::int64_t v)
{
    return std::to_string(v);
}

class CsvTable {
  public:
    explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

    void add_row(std::vector<std::string> row) { rows_.push_back(std::move(row)); }

    std::string str() const
    {
        std::string out;
        auto emit = [&](const std::vector<std::string>& r) {
            for (std::size_t i = 0; i < r.size(); ++i) {
                if (i)
                    out += ',';
                out += r[i];
            }
            out += '\n';
        };
        emit(header_);
        for (const auto& r : rows_)
            emit(r);
        return out;
    }

  private:
    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

inline void write_text_file(const std::filesystem::path& path, const std::string& content)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw Error("cannot write '" + path.string() + "'");
    out << content;
}

inline CsvTable level_table(std::span<const LevelStats> levels)
{
    CsvTable t({"level", "N", "mean_Y", "var_Y", "mean_P", "var_P", "cost_per_sample", "kurtosis"});
    for (const auto& s : levels) {
        const auto m = level_statistics(s);
        t.add_row({std::to_string(s.level), format_number(s.count), format_number(m.mean), format_number(m.variance),
                   format_number(payoff_mean(s)), format_number(payoff_variance(s)),
                   format_number(m.cost_per_sample), format_number(kurtosis(s))});
    }
    return t;
}

//---------------------------------------------------------------------------//
// Samplers from configuration
//---------------------------------------------------------------------------//

using AnySampler = std::variant<SdeSampler, CtmcSampler, ZeroVarianceSampler>;

inline AnySampler make_sampler(const ExperimentConfig& cfg)
{
    if (cfg.ctmc) {
        CtmcModel model = build_ctmc_model(*cfg.ctmc);
        model.validate();
        return CtmcSampler{std::move(model), cfg.ctmc->output};
    }
    if (cfg.is_synthetic())
        return ZeroVarianceSampler{};
    SdeModel model = build_sde_model(*cfg.model);
    model.validate();
    cfg.payoff->validate(model.x0);
    return SdeSampler{std::move(model), cfg.scheme, *cfg.payoff, cfg.mlmc.refinement, cfg.estimator};
}

inline MlmcConfig effective_mlmc_config(const ExperimentConfig& cfg, const CommandOptions& opts)
{
    MlmcConfig m = cfg.mlmc;
    if (opts.seed)
        m.seed = *opts.seed;
    m.workers = std::max(1, opts.workers);
    return m;
}

inline std::filesystem::path output_directory(const ExperimentConfig& cfg, const CommandOptions& opts)
{
    std::filesystem::path dir = opts.out_dir ? *opts.out_dir : cfg.output_dir;
    std::filesystem::create_directories(dir);
    return dir;
}

//---------------------------------------------------------------------------//
// run
//---------------------------------------------------------------------------//

struct RunReport {
    std::optional<MlmcResult> result;
    std::optional<MultiMlmcResult> multi;
    std::vector<std::filesystem::path> files;
    std::vector<std::string> warnings;
};

inline RunReport cmd_run(const ExperimentConfig& cfg, const CommandOptions& opts)
{
    const MlmcConfig mc = effective_mlmc_config(cfg, opts);
    const auto dir = output_directory(cfg, opts);
    RunReport report;

    if (cfg.multi) {
        SdeModel model = build_sde_model(*cfg.model);
        model.validate();
        SdeMultiSampler sampler{model, cfg.scheme, {}, mc.refinement};
        for (double k : cfg.multi->strikes) {
            PayoffSpec p = *cfg.payoff;
            p.strike = k;
            p.validate(model.x0);
            sampler.payoffs.push_back(p);
        }
        MultiMlmcResult res = run_adaptive_mlmc_multi(sampler, mc, MultiOutputSpec{cfg.multi->eps});

        CsvTable levels({"output", "level", "N", "mean_Y", "var_Y", "mean_P", "var_P", "cost_per_sample", "kurtosis"});
        for (const auto& lv : res.levels) {
            for (std::size_t m = 0; m < lv.size(); ++m) {
                const auto& s = lv[m];
                const auto mom = level_statistics(s);
                levels.add_row({std::to_string(m), std::to_string(s.level), format_number(s.count),
                                format_number(mom.mean), format_number(mom.variance), format_number(payoff_mean(s)),
                                format_number(payoff_variance(s)), format_number(mom.cost_per_sample),
                                format_number(kurtosis(s))});
            }
        }
        CsvTable summary({"output", "strike", "estimate", "eps", "total_cost", "L", "terminated_by", "seed"});
        for (std::size_t m = 0; m < res.estimates.size(); ++m)
            summary.add_row({std::to_string(m), format_number(cfg.multi->strikes[m]), format_number(res.estimates[m]),
                             format_number(cfg.multi->eps[m]), format_number(res.total_cost),
                             std::to_string(res.finest_level()), to_string(res.terminated_by),
                             std::to_string(mc.seed)});
        write_text_file(dir / "result.csv", levels.str());
        write_text_file(dir / "summary.csv", summary.str());
        report.files = {dir / "result.csv", dir / "summary.csv"};
        report.warnings = res.warnings;
        if (res.terminated_by == Termination::LMaxReached)
            report.warnings.push_back("finest level l_max reached before the bias test passed");
        report.multi = std::move(res);
        return report;
    }

    const AnySampler sampler = make_sampler(cfg);
    MlmcResult res = std::visit([&](const auto& s) { return run_adaptive_mlmc(s, mc); }, sampler);

    CsvTable summary({"estimate", "eps", "total_cost", "L", "alpha", "beta", "gamma", "terminated_by", "seed"});
    summary.add_row({format_number(res.estimate), format_number(mc.eps), format_number(res.total_cost),
                     std::to_string(res.finest_level()), format_number(res.rates.alpha),
                     format_number(res.rates.beta), format_number(res.rates.gamma), to_string(res.terminated_by),
                     std::to_string(mc.seed)});
    write_text_file(dir / "result.csv", level_table(res.levels).str());
    write_text_file(dir / "summary.csv", summary.str());
    report.files = {dir / "result.csv", dir / "summary.csv"};
    report.warnings = res.warnings;
    report.result = std::move(res);
    return report;
}

//---------------------------------------------------------------------------//
// rates
//---------------------------------------------------------------------------//

struct RatesReport {
    std::vector<LevelStats> levels;
    RateEstimates rates;
    int first_level = 1;
    std::vector<std::filesystem::path> files;
};

/// Rate fits skip level 0 and, once at least three levels remain, level 1 too:
/// the coarsest corrections are usually pre-asymptotic.
inline int rate_fit_first_level(int finest)
{
    return finest >= 4 ? 2 : 1;
}

/// Fixed-level study: `samples` correction samples on each level 0..finest.
inline RatesReport cmd_rates(const ExperimentConfig& cfg, const CommandOptions& opts, int finest,
                             std::int64_t samples)
{
    if (finest < 1)
        throw BadInput("rates: need at least levels 0 and 1");
    if (samples < 2)
        throw BadInput("rates: need at least two samples per level");
    const MlmcConfig mc = effective_mlmc_config(cfg, opts);
    const auto dir = output_directory(cfg, opts);
    const AnySampler sampler = make_sampler(cfg);

    RatesReport report;
    for (int l = 0; l <= finest; ++l) {
        report.levels.push_back(std::visit(
            [&](const auto& s) { return accumulate_samples(s, mc.seed, l, 0, samples, 1, mc.workers)[0]; },
            sampler));
    }
    report.first_level = rate_fit_first_level(finest);
    MlmcConfig no_overrides = mc;
    no_overrides.alpha_override.reset();
    no_overrides.beta_override.reset();
    no_overrides.gamma_override.reset();
    report.rates = fitted_rates(report.levels, no_overrides, report.first_level);

    CsvTable fit({"first_level", "alpha", "beta", "gamma", "c1", "c2", "c3"});
    fit.add_row({std::to_string(report.first_level), format_number(report.rates.alpha),
                 format_number(report.rates.beta), format_number(report.rates.gamma), format_number(report.rates.c1),
                 format_number(report.rates.c2), format_number(report.rates.c3)});
    write_text_file(dir / "rates.csv", level_table(report.levels).str());
    write_text_file(dir / "rates_fit.csv", fit.str());
    report.files = {dir / "rates.csv", dir / "rates_fit.csv"};
    return report;
}

//---------------------------------------------------------------------------//
// complexity
//---------------------------------------------------------------------------//

/// Least-squares slope of log2(cost) against log2(eps), leaving out the
/// largest eps.
inline double complexity_slope(std::span<const double> eps, std::span<const double> costs)
{
    if (eps.size() != costs.size() || eps.size() < 3)
        throw BadInput("complexity_slope: need at least three (eps, cost) pairs");
    std::size_t largest = 0;
    for (std::size_t i = 1; i < eps.size(); ++i)
        if (eps[i] > eps[largest])
            largest = i;
    std::vector<double> x, y;
    for (std::size_t i = 0; i < eps.size(); ++i) {
        if (i == largest)
            continue;
        x.push_back(std::log2(eps[i]));
        y.push_back(std::log2(costs[i]));
    }
    return least_squares(x, y).slope;
}

struct ComplexityReport {
    std::vector<double> eps;
    std::vector<MlmcResult> runs;
    double slope = 0.0;
    std::vector<std::filesystem::path> files;
    std::vector<std::string> warnings;
};

inline ComplexityReport cmd_complexity(const ExperimentConfig& cfg, const CommandOptions& opts,
                                       std::vector<double> eps_list)
{
    if (eps_list.size() < 3)
        throw BadInput("complexity: need at least three eps values");
    for (double e : eps_list)
        if (!(e > 0.0))
            throw BadInput("complexity: eps values must be positive");
    const MlmcConfig base = effective_mlmc_config(cfg, opts);
    const auto dir = output_directory(cfg, opts);
    const AnySampler sampler = make_sampler(cfg);

    ComplexityReport report;
    report.eps = std::move(eps_list);
    std::vector<double> costs;
    int max_level = 0;
    for (double e : report.eps) {
        MlmcConfig mc = base;
        mc.eps = e;
        MlmcResult res = std::visit([&](const auto& s) { return run_adaptive_mlmc(s, mc); }, sampler);
        costs.push_back(res.total_cost);
        max_level = std::max(max_level, res.finest_level());
        for (const auto& w : res.warnings)
            report.warnings.push_back("eps " + format_number(e) + ": " + w);
        report.runs.push_back(std::move(res));
    }
    report.slope = complexity_slope(report.eps, costs);

    std::vector<std::string> header = {"eps", "estimate", "accounted_cost", "L"};
    for (int l = 0; l <= max_level; ++l)
        header.push_back("N_" + std::to_string(l));
    CsvTable table(header);
    for (std::size_t i = 0; i < report.runs.size(); ++i) {
        const auto& r = report.runs[i];
        std::vector<std::string> row = {format_number(report.eps[i]), format_number(r.estimate),
                                        format_number(r.total_cost), std::to_string(r.finest_level())};
        for (int l = 0; l <= max_level; ++l)
            row.push_back(l <= r.finest_level() ? format_number(r.allocation[static_cast<std::size_t>(l)]) : "");
        table.add_row(std::move(row));
    }
    write_text_file(dir / "complexity.csv", table.str());
    report.files = {dir / "complexity.csv"};
    return report;
}

}  // namespace mlmc
