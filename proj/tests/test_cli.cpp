#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include <blockuniv/io.hpp>

namespace fs = std::filesystem;
using namespace blockuniv;

namespace {

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() /
               ("blockuniv_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    std::string path(const std::string& name) const { return (dir_ / name).string(); }

    int run(const std::string& args, const std::string& stdout_file = "") const {
        std::string cmd = std::string(BLOCKUNIV_CLI_PATH) + " " + args;
        cmd += " > " + (stdout_file.empty() ? path("stdout.txt") : stdout_file) + " 2> " + path("stderr.txt");
        const int status = std::system(cmd.c_str());
        return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    }

    std::string out() const { return io::read_file(path("stdout.txt")); }

    fs::path dir_;
};

}  // namespace

TEST_F(Cli, SampleHasRequestedShapeAndIsReproducible) {
    const std::string args = "sample --family additive-trig --p0 3 --d 4 --n 7 --seed 5 --out ";
    ASSERT_EQ(run(args + path("a.csv")), 0);
    ASSERT_EQ(run(args + path("b.csv")), 0);
    const auto a = io::read_file(path("a.csv"));
    EXPECT_EQ(a, io::read_file(path("b.csv")));
    const auto x = io::parse_matrix(a);
    EXPECT_EQ(x.rows(), 7);
    EXPECT_EQ(x.cols(), 12);
    EXPECT_TRUE(fs::exists(path("a.csv.spec")));
    ASSERT_EQ(run("sample --family additive-trig --p0 3 --d 4 --n 7 --seed 5 --replicate 1 --out " + path("c.csv")), 0);
    EXPECT_NE(a, io::read_file(path("c.csv")));
}

TEST_F(Cli, FitToyInstances) {
    io::write_file(path("x.csv"), "1\n1\n");
    io::write_file(path("y.txt"), "1\n1\n");
    ASSERT_EQ(run("fit --penalty ridge --lambda 1 --design " + path("x.csv") + " --y " + path("y.txt") + " --out " +
                  path("b.txt")),
              0);
    EXPECT_NEAR(io::read_vector(path("b.txt"))[0], 0.5, 1e-15);
    EXPECT_NE(out().find("optimum="), std::string::npos);
    ASSERT_EQ(run("fit --penalty lasso --lambda 0.70710678118654752 --design " + path("x.csv") + " --y " +
                  path("y.txt") + " --out " + path("l.txt")),
              0);
    EXPECT_NEAR(io::read_vector(path("l.txt"))[0], 0.5, 1e-12);
}

TEST_F(Cli, LassoAboveNullThresholdIsZero) {
    ASSERT_EQ(run("sample --family gaussian --p0 4 --d 5 --n 30 --seed 2 --out " + path("x.csv")), 0);
    const auto x = io::read_matrix(path("x.csv"));
    VectorXd y = x.col(0) + x.col(3);
    io::write_vector(path("y.txt"), y);
    const double null_lambda = (x.transpose() * y).lpNorm<Eigen::Infinity>() / std::sqrt(30.0);
    ASSERT_EQ(run("fit --penalty lasso --lambda " + io::format_double(1.01 * null_lambda) + " --design " +
                  path("x.csv") + " --y " + path("y.txt")),
              0);
    EXPECT_TRUE(io::parse_vector(out()).isZero(0.0));
}

TEST_F(Cli, MalformedInputsExitWithUsageCode) {
    io::write_file(path("bad.csv"), "1,2\n3\n");
    io::write_file(path("y.txt"), "1\n1\n");
    EXPECT_EQ(run("fit --penalty lasso --lambda 1 --design " + path("bad.csv") + " --y " + path("y.txt")), 2);
    EXPECT_EQ(run("fit --penalty lasso --lambda 1 --design " + path("missing.csv") + " --y " + path("y.txt")), 2);
    EXPECT_EQ(run("fit --penalty elastic --lambda 1 --design " + path("bad.csv") + " --y " + path("y.txt")), 2);
    EXPECT_EQ(run("sample --family additive-trig --p0 2 --d 3 --n 4"), 2);
    EXPECT_EQ(run("sample --family gwas --p0 2 --d 3 --n 4 --bogus 1"), 2);
    EXPECT_EQ(run("nonsense"), 2);
    EXPECT_EQ(run(""), 2);
}

TEST_F(Cli, NonConvergenceExitsWithNumericCode) {
    ASSERT_EQ(run("sample --family gaussian --p0 5 --d 4 --n 30 --seed 8 --out " + path("x.csv")), 0);
    const auto x = io::read_matrix(path("x.csv"));
    io::write_vector(path("y.txt"), x.rowwise().sum());
    EXPECT_EQ(run("fit --penalty lasso --lambda 0.01 --max-sweeps 1 --design " + path("x.csv") + " --y " +
                  path("y.txt")),
              3);
}

TEST_F(Cli, StateEvolutionZeroRatio) {
    io::write_file(path("s.txt"), "ratio=0,sigma=1.5\n0,1\n1,1\n");
    ASSERT_EQ(run("state-evolution --penalty lasso --lambda 0.5 --spectrum " + path("s.txt")), 0);
    const auto kv = io::parse_key_values(out());
    EXPECT_EQ(io::parse_double(kv.at("beta_star"), "beta_star"), 1.5);
    EXPECT_EQ(io::parse_double(kv.at("gamma_star"), "gamma_star"), 1.5);
    EXPECT_EQ(io::parse_double(kv.at("predicted_risk"), "predicted_risk"), 0.0);
    io::write_file(path("bad.txt"), "ratio=0.5\n0,1\n");
    EXPECT_EQ(run("state-evolution --penalty lasso --lambda 0.5 --spectrum " + path("bad.txt")), 2);
}

TEST_F(Cli, DiagnoseDistinguishesGaussianFromGwas) {
    io::write_file(path("g.spec"), "family=gaussian\np0=4\nd=5\n");
    io::write_file(path("w.spec"), "family=gwas\np0=4\nd=5\n");
    ASSERT_EQ(run("diagnose --design-spec " + path("g.spec") + " --theta e1 --samples 3000 --seed 1"), 0);
    EXPECT_LT(std::stod(out()), 1.36 / std::sqrt(3000.0));
    ASSERT_EQ(run("diagnose --design-spec " + path("w.spec") + " --theta e1 --samples 3000 --seed 1"), 0);
    EXPECT_GE(std::stod(out()), 0.2);
    EXPECT_EQ(run("diagnose --design-spec " + path("w.spec") + " --theta e99"), 2);
}

TEST_F(Cli, ExperimentIsReproducibleAcrossThreads) {
    io::write_file(path("c.cfg"),
                   "family=functional\np0=4\nd=3\nn=40\npenalty=ridge\nlambdas=0.2,1\nreplicates=4\nseed=3\n");
    ASSERT_EQ(run("experiment --config " + path("c.cfg") + " --out " + path("a.csv")), 0);
    ASSERT_EQ(run("experiment --config " + path("c.cfg") + " --threads 3 --out " + path("b.csv") + " --spectrum-out " +
                  path("s.txt")),
              0);
    EXPECT_EQ(io::read_file(path("a.csv")), io::read_file(path("b.csv")));
    EXPECT_EQ(io::lines(io::read_file(path("a.csv"))).size(), 3u);
    ASSERT_EQ(run("state-evolution --penalty ridge --lambda 1 --spectrum " + path("s.txt")), 0);
    io::write_file(path("bad.cfg"), "family=functional\np0=4\nd=3\nwhat=1\n");
    EXPECT_EQ(run("experiment --config " + path("bad.cfg")), 2);
}
