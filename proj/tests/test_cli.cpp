// Exit-code contract of the command line, exercised against the real binary.
#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

namespace fs = std::filesystem;

namespace {

int run_cli(const std::string& args) {
    std::string cmd = std::string(POISONLAB_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

std::string config_path() { return std::string(POISONLAB_CONFIG_DIR) + "/maze_default.cfg"; }

TEST(Cli, GradcheckPassesAndCorruptionIsCaught) {
    EXPECT_EQ(run_cli("gradcheck"), 0);
    EXPECT_EQ(run_cli("gradcheck --corrupt"), 2);
    EXPECT_EQ(run_cli("gradcheck --points 5 --seed 99"), 0);
}

TEST(Cli, OracleCompareContract) {
    EXPECT_EQ(run_cli("oracle-compare"), 0);
    EXPECT_EQ(run_cli("oracle-compare --iterations 0"), 2);  // zero budget cannot satisfy gaps
}

TEST(Cli, RunRejectsBadInputs) {
    std::string out = ::testing::TempDir() + "cli_bad";
    EXPECT_EQ(run_cli("run --config /does/not/exist.cfg --out " + out), 1);
    EXPECT_EQ(run_cli("run --config " + config_path() + " --iterations 0 --out " + out), 1);
    std::string broken = ::testing::TempDir() + "broken.cfg";
    {
        std::ofstream cfg(broken);
        cfg << "[mdp]\ntype = warp\n";
    }
    EXPECT_EQ(run_cli("run --config " + broken + " --out " + out), 1);
}

TEST(Cli, PlotRejectsMissingColumns) {
    std::string dir = ::testing::TempDir() + "cli_plot";
    fs::create_directories(dir);
    std::string bad = dir + "/bad.csv";
    {
        std::ofstream csv(bad);
        csv << "iteration,field,mean,min\n0,x,1,1\n";
    }
    EXPECT_EQ(run_cli("plot --aggregate " + bad + " --out " + dir), 1);
    EXPECT_EQ(run_cli("plot --out " + dir), 1);  // no inputs at all
}

TEST(Cli, UnknownFlagsAndHelp) {
    EXPECT_EQ(run_cli("--help"), 0);
    EXPECT_EQ(run_cli("frobnicate"), 1);
    EXPECT_EQ(run_cli("run"), 1);  // --config is required
}

}  // namespace
