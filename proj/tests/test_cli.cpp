#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "hhmap/cli.hpp"

using namespace hhmap;
namespace fs = std::filesystem;

namespace {

struct CliRun {
    int code;
    std::string out, err;
};

// fresh output directory per test
class CliTest : public ::testing::Test {
protected:
    void SetUp() override {
        dir = fs::temp_directory_path() /
              ("hhmap_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    void TearDown() override { fs::remove_all(dir); }

    CliRun run(std::vector<std::string> args, bool with_dir = true) {
        args.insert(args.begin(), "hhmap");
        if (with_dir && args.size() > 1 && args[1] != "--help") {
            args.push_back("--output_dir");
            args.push_back(dir.string());
        }
        std::vector<const char*> argv;
        for (const auto& a : args) argv.push_back(a.c_str());
        std::ostringstream out, err;
        const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
        return {code, out.str(), err.str()};
    }

    std::string slurp(const fs::path& p) {
        std::ifstream f(p);
        std::stringstream ss;
        ss << f.rdbuf();
        return ss.str();
    }

    fs::path dir;
};

}  // namespace

TEST(Cli, ConfigTextParsing) {
    cli::Config cfg;
    cfg.merge_text("# a comment\n\nR = 2..6   # trailing comment\nmap=identity\n  tol = 1e-9\n");
    EXPECT_EQ(cfg.text("map"), "identity");
    EXPECT_DOUBLE_EQ(cfg.real("tol"), 1e-9);
    EXPECT_EQ(cfg.radii(), (std::vector<double>{2, 3, 4, 5, 6}));
    EXPECT_NO_THROW(cfg.validate());
    EXPECT_THROW(cfg.merge_text("colour = blue\n"), usage_error);
    EXPECT_THROW(cfg.merge_text("just words\n"), usage_error);
    try {
        cfg.merge_text("R = 1\nbogus = 3\n", "file.cfg");
        FAIL();
    } catch (const usage_error& e) {
        EXPECT_NE(std::string(e.what()).find("file.cfg:2"), std::string::npos);
    }
}

TEST(Cli, ValidationRejectsBadValues) {
    const std::vector<std::pair<std::string, std::string>> bad = {
        {"tol", "abc"},      {"tol", "1"},        {"n_theta", "33"},  {"n_r", "2.5"},       {"map", "nonsense"},
        {"R", "6..2"},       {"R", "0"},          {"bins", "12"},     {"seed", "-1"},       {"beta", "-1"},
        {"threads", "0"},    {"init", "random"},  {"a", "2"},         {"R", "4,x"},
    };
    for (const auto& [k, v] : bad) {
        cli::Config cfg;
        cfg.set(k, v);
        EXPECT_THROW(cfg.validate(), usage_error) << k << " = " << v;
    }
    cli::Config ok;
    ok.set("beta", "inf");
    ok.set("R", "4,6,8");
    EXPECT_NO_THROW(ok.validate());
    EXPECT_EQ(ok.radii(), (std::vector<double>{4, 6, 8}));
    ok.set("R", "1..2");
    ok.set("R_step", "0.5");
    EXPECT_EQ(ok.radii(), (std::vector<double>{1, 1.5, 2}));
}

TEST_F(CliTest, ConstantsPrintsEps0AndEll0) {
    const CliRun r = run({"constants", "--a", "1", "--b", "1", "--c", "1", "--M", "6.2832", "--N", "1"});
    EXPECT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("eps0 = 0.0530"), std::string::npos) << r.out;
    EXPECT_NE(r.out.find("ell0 = "), std::string::npos);
    const std::string csv = slurp(dir / "constants.csv");
    EXPECT_EQ(csv.rfind("# experiment=constants config_hash=", 0), 0u);
    EXPECT_NE(csv.find(" seed=1\nname,value\neps0,"), std::string::npos);
}

TEST_F(CliTest, ExitCodes) {
    EXPECT_EQ(run({"constants", "--A", "1e8"}).code, 3);
    EXPECT_EQ(run({"constants", "--b", "0.5"}).code, 2);
    EXPECT_EQ(run({"solve", "--unknown", "1"}).code, 2);
    EXPECT_EQ(run({"frobnicate"}).code, 2);
    EXPECT_EQ(run({}, false).code, 2);
    const CliRun help = run({"--help"}, false);
    EXPECT_EQ(help.code, 0);
    EXPECT_NE(help.out.find("spiral_embedding"), std::string::npos);
    EXPECT_NE(help.out.find("f_beta"), std::string::npos);
    const CliRun sub_help = run({"solve", "--help"}, false);
    EXPECT_EQ(sub_help.code, 0);
    EXPECT_NE(sub_help.out.find("--tol"), std::string::npos);
    EXPECT_NE(sub_help.out.find("[1e-8]"), std::string::npos);
}

TEST_F(CliTest, ConfigFileAndFlagPrecedence) {
    const fs::path cfg = dir / "run.cfg";
    std::ofstream(cfg) << "# identity scan\nmap = identity\nR = 2..3\nn_theta = 16\n";
    const CliRun r = run({"rho-scan", "--config", cfg.string(), "--n_theta", "32"});
    EXPECT_EQ(r.code, 0) << r.err;
    const std::string csv = slurp(dir / "rho_scan.csv");
    std::istringstream in(csv);
    std::string line;
    std::getline(in, line);
    std::getline(in, line);
    EXPECT_EQ(line, "R,rho,converged,residual,iterations,nodes");
    int rows = 0;
    while (std::getline(in, line)) {
        ++rows;
        const double rho = std::stod(line.substr(line.find(',') + 1));
        EXPECT_LT(rho, 5e-3);  // truncation error only
        EXPECT_NE(line.find(",1,"), std::string::npos);
    }
    EXPECT_EQ(rows, 2);
    // flags win over the file: 32 angles per ring, 8 rings at R = 2 plus the centre
    EXPECT_NE(csv.find("\n2,"), std::string::npos);
    std::ofstream(dir / "bad.cfg") << "map = identity\nwidth = 3\n";
    EXPECT_EQ(run({"rho-scan", "--config", (dir / "bad.cfg").string()}).code, 2);
    EXPECT_EQ(run({"rho-scan", "--config", (dir / "missing.cfg").string()}).code, 2);
}

TEST_F(CliTest, RhoScanAssertions) {
    EXPECT_EQ(run({"rho-scan", "--map", "scale", "--R", "3,4", "--expect", "plateau"}).code, 0);
    const CliRun g = run({"rho-scan", "--map", "scale", "--R", "3,4", "--expect", "growth"});
    EXPECT_EQ(g.code, 1);
    EXPECT_NE(g.err.find("rho(R_max)/rho(R_min)"), std::string::npos);
}

TEST_F(CliTest, OutputDirectoryFromEnvironment) {
    const fs::path env_dir = dir / "from_env";
    setenv("HH_OUTPUT_DIR", env_dir.c_str(), 1);
    const CliRun r = run({"constants"});
    unsetenv("HH_OUTPUT_DIR");
    EXPECT_EQ(r.code, 0);
    EXPECT_TRUE(fs::exists(env_dir / "constants.csv"));
    EXPECT_TRUE(fs::exists(env_dir / "constants.jsonl"));
    EXPECT_FALSE(fs::exists(dir / "constants.csv"));
}

TEST_F(CliTest, SeedMakesOutputsByteIdenticalAcrossThreads) {
    std::string first;
    for (const char* threads : {"1", "3"}) {
        const fs::path sub = dir / threads;
        const CliRun r = run({"frostman", "--probe_dist", "0.4", "--walkers", "20000", "--seed", "11", "--threads", threads,
                           "--output_dir", sub.string()}, false);
        EXPECT_EQ(r.code, 0) << r.err;
        const std::string csv = slurp(sub / "frostman.csv") + slurp(sub / "frostman.jsonl");
        if (first.empty())
            first = csv;
        else
            EXPECT_EQ(csv, first);
    }
    const CliRun other = run({"frostman", "--probe_dist", "0.4", "--walkers", "20000", "--seed", "12",
                           "--output_dir", (dir / "other").string()}, false);
    EXPECT_NE(slurp(dir / "other" / "frostman.csv"), first.substr(0, first.find("{")));
}

TEST_F(CliTest, SolveWritesNodalCsv) {
    const CliRun r = run({"solve", "--map", "scale", "--R", "2", "--c", "2"});
    EXPECT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("rho = "), std::string::npos);
    const std::string csv = slurp(dir / "solve.csv");
    EXPECT_NE(csv.find("\nnode,s,boundary,x_u,x_v,h_u,h_v,d_hf\n0,"), std::string::npos);
    EXPECT_EQ(run({"solve", "--R", "2,3"}).code, 2);
}

TEST_F(CliTest, BoundaryMapAndSmooth) {
    const CliRun b = run({"boundary-map", "--map", "identity", "--directions", "8", "--n_max", "32", "--threads", "2"});
    EXPECT_EQ(b.code, 0) << b.err;
    const std::string csv = slurp(dir / "boundary_map.csv");
    EXPECT_NE(csv.find("\nangle,speed_hat,inA,boundary_angle\n0,"), std::string::npos);
    EXPECT_EQ(run({"boundary-map", "--n0", "100", "--n_max", "10"}).code, 2);
    const CliRun s = run({"smooth", "--map", "identity"});
    EXPECT_EQ(s.code, 0) << s.err;
    EXPECT_NE(slurp(dir / "smooth.csv").find("node_id,d_offset,fd_Df,fd_D2f"), std::string::npos);
}

TEST_F(CliTest, PhiTableFile) {
    std::ofstream(dir / "phi.csv") << "t,phi\n0,0\n0.05,0.05\n2,0.05\n";
    const CliRun r = run({"boundary-map", "--map", "spiral_embedding", "--phi1_table", (dir / "phi.csv").string(),
                       "--directions", "8", "--n_max", "16"});
    EXPECT_EQ(r.code, 0) << r.err;
    std::ofstream(dir / "steep.csv") << "0,0\n1,2\n";
    EXPECT_EQ(run({"boundary-map", "--map", "spiral_embedding", "--phi1_table", (dir / "steep.csv").string()}).code, 2);
}

TEST_F(CliTest, CounterexampleAndVerify) {
    const CliRun c = run({"counterexample", "--R", "3,6"});
    EXPECT_EQ(c.code, 0) << c.out << c.err;
    EXPECT_NE(c.out.find("parabolic rho(R_max)/rho(R_min)"), std::string::npos);
    EXPECT_EQ(run({"counterexample", "--R", "4"}).code, 2);
    const CliRun v = run({"verify", "--criteria", "1,3"});
    EXPECT_EQ(v.code, 0) << v.out;
    EXPECT_NE(v.out.find("PASS criterion 1"), std::string::npos);
    EXPECT_NE(v.out.find("PASS criterion 3"), std::string::npos);
    EXPECT_EQ(v.out.find("criterion 2"), std::string::npos);
    EXPECT_EQ(run({"verify", "--criteria", "12"}).code, 2);
}
