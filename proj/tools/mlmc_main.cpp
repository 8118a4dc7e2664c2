// mlmc run|rates|complexity --config FILE [options]
//
// Exit codes: 0 success (warnings included), 1 usage or runtime failure,
// 2 configuration error.

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mlmc/mlmc.hpp"

namespace {

std::vector<double> parse_eps_list(const std::string& text)
{
    std::vector<double> out;
    std::size_t start = 0;
    for (;;) {
        const auto pos = text.find(',', start);
        out.push_back(mlmc::detail::SectionReader::parse_number<double>(
            mlmc::detail::trim(std::string_view(text).substr(start, pos - start)), "--eps-list", 0));
        if (pos == std::string::npos)
            break;
        start = pos + 1;
    }
    return out;
}

void print_warnings(const std::vector<std::string>& warnings)
{
    for (const auto& w : warnings)
        std::cerr << "warning: " << w << '\n';
}

void print_files(const std::vector<std::filesystem::path>& files)
{
    for (const auto& f : files)
        std::cout << "wrote " << f.string() << '\n';
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Multilevel Monte Carlo experiment runner"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    int workers = 1;
    int levels = 7;
    std::int64_t samples = 100000;
    std::string eps_list;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "experiment configuration (INI)")->required();
        sub->add_option("--seed", seed, "override [mlmc] seed");
        sub->add_option("--out", out_dir, "output directory (overrides [output] directory)");
        sub->add_option("--workers", workers, "parallel sampling threads")->check(CLI::PositiveNumber);
    };
    auto* run = app.add_subcommand("run", "adaptive MLMC run to accuracy [mlmc] eps");
    add_common(run);
    auto* rates = app.add_subcommand("rates", "fixed samples per level; fit alpha, beta, gamma");
    add_common(rates);
    rates->add_option("--levels", levels, "finest level L")->check(CLI::PositiveNumber);
    rates->add_option("--samples", samples, "samples per level")->check(CLI::Range(std::int64_t{2}, INT64_MAX));
    auto* complexity = app.add_subcommand("complexity", "one adaptive run per eps; cost-vs-eps slope");
    add_common(complexity);
    complexity->add_option("--eps-list", eps_list, "comma-separated accuracies (at least three)")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    mlmc::ExperimentConfig cfg;
    try {
        cfg = mlmc::load_config(config_path);
    } catch (const mlmc::Error& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    }

    const mlmc::CommandOptions opts{seed, out_dir, workers};
    try {
        if (run->parsed()) {
            const auto report = mlmc::cmd_run(cfg, opts);
            if (report.result) {
                const auto& r = *report.result;
                std::cout << "estimate " << mlmc::format_number(r.estimate) << "  L " << r.finest_level()
                          << "  cost " << mlmc::format_number(r.total_cost) << "  " << mlmc::to_string(r.terminated_by)
                          << '\n';
            } else {
                const auto& r = *report.multi;
                for (std::size_t m = 0; m < r.estimates.size(); ++m)
                    std::cout << "output " << m << " estimate " << mlmc::format_number(r.estimates[m]) << '\n';
                std::cout << "L " << r.finest_level() << "  cost " << mlmc::format_number(r.total_cost) << "  "
                          << mlmc::to_string(r.terminated_by) << '\n';
            }
            print_warnings(report.warnings);
            print_files(report.files);
        } else if (rates->parsed()) {
            const auto report = mlmc::cmd_rates(cfg, opts, levels, samples);
            std::cout << "fit over levels " << report.first_level << ".." << levels
                      << ": alpha " << mlmc::format_number(report.rates.alpha)
                      << "  beta " << mlmc::format_number(report.rates.beta)
                      << "  gamma " << mlmc::format_number(report.rates.gamma) << '\n';
            print_files(report.files);
        } else {
            std::vector<double> eps;
            try {
                eps = parse_eps_list(eps_list);
            } catch (const mlmc::Error& e) {
                std::cerr << "error: " << e.what() << '\n';
                return 1;
            }
            const auto report = mlmc::cmd_complexity(cfg, opts, eps);
            std::cout << "log2(cost) vs log2(eps) slope " << mlmc::format_number(report.slope) << '\n';
            print_warnings(report.warnings);
            print_files(report.files);
        }
    } catch (const mlmc::ValidationError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
