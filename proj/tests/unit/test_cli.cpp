#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name)
{
    const fs::path dir = fs::temp_directory_path() / ("mlmc_cli_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

fs::path write_config(const fs::path& dir, const std::string& text)
{
    const fs::path p = dir / "config.ini";
    std::ofstream(p) << text;
    return p;
}

int run_cli(const std::string& args, const fs::path& log)
{
    const std::string cmd = std::string(MLMC_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p)
{
    std::vector<std::vector<std::string>> rows;
    std::ifstream in(p);
    for (std::string line; std::getline(in, line);) {
        std::vector<std::string> cells;
        std::stringstream ss(line);
        for (std::string c; std::getline(ss, c, ',');)
            cells.push_back(c);
        rows.push_back(cells);
    }
    return rows;
}

const char* kEuropean = R"([model]
kind = gbm
[payoff]
kind = european
strike = 100
[mlmc]
eps = 0.1
seed = 5
)";

}  // namespace

TEST(Cli, SyntheticRunStopsAtLevelFour)
{
    const auto dir = scratch("synthetic");
    const auto cfg = write_config(dir, "[model]\nkind = synthetic\n[mlmc]\neps = 0.1\nalpha = 1\n");
    ASSERT_EQ(run_cli("run --config " + cfg.string() + " --out " + (dir / "out").string(), dir / "log"), 0);
    const auto summary = read_csv(dir / "out" / "summary.csv");
    ASSERT_EQ(summary.size(), 2u);
    EXPECT_EQ(summary[0][3], "L");
    EXPECT_EQ(summary[1][3], "4");
    EXPECT_EQ(summary[1][0], "1.9375");
    EXPECT_EQ(read_csv(dir / "out" / "result.csv").size(), 6u);
}

TEST(Cli, SameSeedGivesByteIdenticalOutputForAnyWorkerCount)
{
    const auto dir = scratch("determinism");
    const auto cfg = write_config(dir, kEuropean);
    for (const char* w : {"1", "4"})
        for (const char* rep : {"a", "b"})
            ASSERT_EQ(run_cli("run --config " + cfg.string() + " --seed 11 --workers " + w + " --out " +
                                  (dir / (std::string(w) + rep)).string(),
                              dir / "log"),
                      0);
    for (const char* f : {"result.csv", "summary.csv"}) {
        const std::string ref = slurp(dir / "1a" / f);
        EXPECT_FALSE(ref.empty());
        EXPECT_EQ(slurp(dir / "1b" / f), ref) << f;
        EXPECT_EQ(slurp(dir / "4a" / f), ref) << f;
        EXPECT_EQ(slurp(dir / "4b" / f), ref) << f;
    }
    ASSERT_EQ(run_cli("run --config " + cfg.string() + " --seed 12 --out " + (dir / "other").string(), dir / "log"), 0);
    EXPECT_NE(slurp(dir / "other" / "summary.csv"), slurp(dir / "1a" / "summary.csv"));
}

TEST(Cli, ConfigErrorsExitWithTwo)
{
    const auto dir = scratch("config_errors");
    auto cfg = write_config(dir, std::string(kEuropean) + "epz = 0.1\n");
    EXPECT_EQ(run_cli("run --config " + cfg.string(), dir / "log"), 2);
    EXPECT_NE(slurp(dir / "log").find("epz"), std::string::npos);
    cfg = write_config(dir, "[model]\n[payoff]\n[mlmc]\neps = -0.1\n");
    EXPECT_EQ(run_cli("run --config " + cfg.string(), dir / "log"), 2);
    EXPECT_NE(slurp(dir / "log").find("mlmc.eps"), std::string::npos);
    EXPECT_EQ(run_cli("run --config " + (dir / "missing.ini").string(), dir / "log"), 2);
}

TEST(Cli, UsageErrorsExitWithOne)
{
    const auto dir = scratch("usage");
    EXPECT_EQ(run_cli("", dir / "log"), 1);
    EXPECT_EQ(run_cli("run", dir / "log"), 1);
    EXPECT_EQ(run_cli("frobnicate --config x", dir / "log"), 1);
    const auto cfg = write_config(dir, kEuropean);
    EXPECT_EQ(run_cli("complexity --config " + cfg.string() + " --eps-list 0.1,0.05 --out " + dir.string(),
                      dir / "log"),
              1);
    EXPECT_EQ(run_cli("complexity --config " + cfg.string() + " --eps-list 0.1,x,3 --out " + dir.string(),
                      dir / "log"),
              1);
    EXPECT_EQ(run_cli("run --config " + cfg.string() + " --workers 0", dir / "log"), 1);
}

TEST(Cli, LMaxReachedIsAWarning)
{
    const auto dir = scratch("lmax");
    const auto cfg = write_config(dir, "[model]\nkind = synthetic\n[mlmc]\neps = 0.1\nalpha = 1\nl_max = 3\n");
    EXPECT_EQ(run_cli("run --config " + cfg.string() + " --out " + dir.string(), dir / "log"), 0);
    EXPECT_NE(slurp(dir / "log").find("warning"), std::string::npos);
    EXPECT_EQ(read_csv(dir / "summary.csv")[1][7], "LMaxReached");
}

TEST(Cli, CtmcRatesVarianceColumnDecreases)
{
    const auto dir = scratch("ctmc_rates");
    const auto cfg = write_config(dir, "[ctmc]\nx0 = 10\nT = 1\nsteps0 = 4\nreaction1 = 1 ; 1 ; 1\n");
    ASSERT_EQ(run_cli("rates --config " + cfg.string() + " --levels 6 --samples 10000 --out " + dir.string(),
                      dir / "log"),
              0);
    const auto rows = read_csv(dir / "rates.csv");
    ASSERT_EQ(rows.size(), 8u);
    ASSERT_EQ(rows[0][3], "var_Y");
    for (std::size_t r = 2; r < rows.size(); ++r)
        EXPECT_LT(std::stod(rows[r][3]), std::stod(rows[r - 1][3])) << "level " << r - 1;
    const auto fit = read_csv(dir / "rates_fit.csv");
    ASSERT_EQ(fit.size(), 2u);
    EXPECT_EQ(fit[0][0], "first_level");
}

TEST(Cli, ComplexityWritesOneRowPerEps)
{
    const auto dir = scratch("complexity");
    const auto cfg = write_config(dir, kEuropean);
    ASSERT_EQ(run_cli("complexity --config " + cfg.string() + " --eps-list 0.4,0.2,0.1 --out " + dir.string(),
                      dir / "log"),
              0);
    const auto rows = read_csv(dir / "complexity.csv");
    ASSERT_EQ(rows.size(), 4u);
    EXPECT_EQ(rows[0][0], "eps");
    EXPECT_EQ(rows[0][2], "accounted_cost");
    EXPECT_NE(slurp(dir / "log").find("slope"), std::string::npos);
}

TEST(Cli, MultiOutputRun)
{
    const auto dir = scratch("multi");
    const auto cfg = write_config(dir, std::string(kEuropean) + "[multi]\neps = 0.1, 0.2\nstrikes = 95, 110\n");
    ASSERT_EQ(run_cli("run --config " + cfg.string() + " --out " + dir.string(), dir / "log"), 0);
    const auto rows = read_csv(dir / "summary.csv");
    ASSERT_EQ(rows.size(), 3u);
    EXPECT_EQ(rows[1][1], "95");
    EXPECT_EQ(rows[2][1], "110");
}
