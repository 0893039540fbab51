#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>
#include <unistd.h>

#include <json.hpp>

#include "decomposite/cli.hpp"

namespace decomposite {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct CliRun {
    int code;
    std::string out;
    std::string err;
};

CliRun cli(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

std::vector<std::string> csv_lines(const std::string& text) {
    std::vector<std::string> lines;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);) lines.push_back(line);
    return lines;
}

class CliTest : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() / ("decomposite_cli_" + std::to_string(::getpid()));
        fs::create_directories(dir_);
        data_ = (dir_ / "d.csv").string();
        std::ofstream f(data_);
        write_csv(f, sample_mvn(Vector::Constant(8, 0.1), ar1_covariance(0.5, 8), 40, 3));
    }
    void TearDown() override { fs::remove_all(dir_); }

    std::string write(const std::string& name, const std::string& text) {
        const std::string path = (dir_ / name).string();
        std::ofstream(path) << text;
        return path;
    }

    fs::path dir_;
    std::string data_;
};

TEST_F(CliTest, TestDecompositeJson) {
    const CliRun r = cli({"test", "--input", data_, "--method", "decomposite", "--out", "json"});
    ASSERT_EQ(r.code, 0) << r.err;
    const json j = json::parse(r.out);
    for (const char* key : {"method", "statistic", "normalized", "p_value", "config", "warnings"}) {
        EXPECT_TRUE(j.contains(key)) << key;
    }
    EXPECT_EQ(j["method"], "decomposite");
    EXPECT_TRUE(j["normalized"].is_number());
    EXPECT_GE(j["p_value"].get<double>(), 0.0);
    EXPECT_EQ(j["config"]["n"], 40);
    EXPECT_EQ(j["config"]["p"], 8);
    EXPECT_TRUE(j["warnings"].is_array());
    const double direct = normalized_decomposite(read_csv(data_, false)).statistic;
    EXPECT_DOUBLE_EQ(j["statistic"].get<double>(), direct);
}

TEST_F(CliTest, TestEveryMethod) {
    for (const std::string m : {"hotelling", "decomposite", "stein", "bs", "diag", "composite"}) {
        const CliRun r = cli({"test", "--input", data_, "--method", m});
        EXPECT_EQ(r.code, 0) << m << ": " << r.err;
    }
    const CliRun ridge = cli({"test", "--input", data_, "--method", "ridge", "--ridge", "0.5", "--out", "csv"});
    ASSERT_EQ(ridge.code, 0) << ridge.err;
    const auto lines = csv_lines(ridge.out);
    ASSERT_EQ(lines.size(), 2u);
    EXPECT_EQ(lines[0], "method,statistic,normalized,p_value");
}

TEST_F(CliTest, HotellingReportsDegreesOfFreedom) {
    const json j = json::parse(cli({"test", "--input", data_, "--method", "hotelling"}).out);
    EXPECT_EQ(j["df"][0], 8.0);
    EXPECT_EQ(j["df"][1], 32.0);
    EXPECT_TRUE(j.contains("reject"));
}

TEST_F(CliTest, Mu0Shift) {
    const std::string mu0 = write("mu0.csv", "0.1,0.1,0.1,0.1,0.1,0.1,0.1,0.1\n");
    const json shifted = json::parse(cli({"test", "--input", data_, "--method", "bs", "--mu0", mu0}).out);
    const Vector m = Vector::Constant(8, 0.1);
    const double direct = variant_statistic(shift_rows(read_csv(data_, false), m), Variant::BaiSaranadasa).statistic;
    EXPECT_NEAR(shifted["statistic"].get<double>(), direct, 1e-12);
    const std::string bad = write("bad_mu0.csv", "1,2\n");
    EXPECT_EQ(cli({"test", "--input", data_, "--mu0", bad}).code, 2);
}

TEST_F(CliTest, UsageErrorsExitTwo) {
    EXPECT_EQ(cli({"test", "--input", data_, "--method", "nosuch"}).code, 2);
    EXPECT_EQ(cli({"frobnicate"}).code, 2);
    EXPECT_EQ(cli({}).code, 2);
    EXPECT_EQ(cli({"test"}).code, 2);
    EXPECT_EQ(cli({"test", "--input", data_, "--bogus"}).code, 2);
    EXPECT_EQ(cli({"test", "--input", data_, "--method", "ridge"}).code, 2);
    EXPECT_EQ(cli({"bootstrap", "--input", data_}).code, 2);  // no --seed
    EXPECT_EQ(cli({"simulate-power", "--reps", "5"}).code, 2);
    EXPECT_EQ(cli({"fixtures"}).code, 2);
    const CliRun r = cli({"test", "--input", data_, "--method", "nosuch"});
    EXPECT_NE(r.err.find("--method"), std::string::npos);
}

TEST_F(CliTest, ComputationErrorsExitOne) {
    const std::string wide = write("wide.csv", "1,2,3\n4,5,7\n");
    EXPECT_EQ(cli({"test", "--input", wide, "--method", "hotelling"}).code, 1);
    EXPECT_EQ(cli({"test", "--input", wide, "--method", "decomposite"}).code, 1);
    const std::string bad = write("bad.csv", "1,2\n3,abc\n");
    const CliRun r = cli({"test", "--input", bad});
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("column 2"), std::string::npos);
    EXPECT_EQ(cli({"test", "--input", (dir_ / "missing.csv").string()}).code, 1);
}

TEST_F(CliTest, HelpExitsZero) {
    const CliRun r = cli({"--help"});
    EXPECT_EQ(r.code, 0);
    EXPECT_NE(r.out.find("simulate-power"), std::string::npos);
}

TEST_F(CliTest, BootstrapJsonDeterministic) {
    const std::vector<std::string> args = {"bootstrap", "--input", data_, "--reps", "200", "--frac",
                                           "0.95",      "--tail",  "lower", "--seed", "7"};
    const CliRun a = cli(args), b = cli(args);
    ASSERT_EQ(a.code, 0) << a.err;
    EXPECT_EQ(a.out, b.out);
    const json j = json::parse(a.out);
    for (const char* key : {"method", "statistic", "normalized", "p_value", "config", "warnings"}) {
        EXPECT_TRUE(j.contains(key)) << key;
    }
    EXPECT_EQ(j["config"]["reps"], 200);
    EXPECT_EQ(j["config"]["resample_size"], 38);
    EXPECT_EQ(j["config"]["tail"], "lower");
    EXPECT_EQ(j["config"]["seed"], 7);
    EXPECT_EQ(j["quantiles"].size(), 7u);
    const double pv = j["p_value"].get<double>();
    EXPECT_GE(pv, 0.0);
    EXPECT_LE(pv, 1.0);
}

TEST_F(CliTest, BootstrapNondeterministicAndNoCenter) {
    const CliRun r = cli({"bootstrap", "--input", data_, "--reps", "20", "--nondeterministic", "--no-center",
                       "--method", "bs", "--out", "csv"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(csv_lines(r.out)[0], "method,statistic,p_value,reps,redraws");
}

TEST_F(CliTest, SimulatePowerCsvSchema) {
    const CliRun r = cli({"simulate-power", "--p", "6", "--n", "20", "--rho", "-0.5,0.5", "--reps", "30", "--k", "2",
                       "--methods", "decomposite,composite", "--seed", "3"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto lines = csv_lines(r.out);
    ASSERT_EQ(lines.size(), 5u);
    EXPECT_EQ(lines[0], "method,rho,p,n,rejection_rate,std_err,are_vs_composite");
    EXPECT_EQ(lines[1].rfind("decomposite,-0.5,6,20,", 0), 0u);
}

TEST_F(CliTest, SimulatePowerJson) {
    const CliRun r = cli({"simulate-power", "--p", "6", "--n", "20", "--reps", "20", "--seed", "3", "--oracle-reps",
                       "5", "--out", "json"});
    ASSERT_EQ(r.code, 0) << r.err;
    const json j = json::parse(r.out);
    EXPECT_EQ(j["results"].size(), 2u);
    EXPECT_EQ(j["analytic_are"].size(), 1u);
    for (const char* key : {"method", "rho", "p", "n", "rejection_rate", "std_err", "are_vs_composite"}) {
        EXPECT_TRUE(j["results"][0].contains(key)) << key;
    }
}

TEST_F(CliTest, SpectrumCsv) {
    const CliRun r = cli({"spectrum", "--input", data_});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto lines = csv_lines(r.out);
    ASSERT_EQ(lines.size(), 9u);
    EXPECT_EQ(lines[0], "lambda,stein,lw");
    const std::string wide = write("wide.csv", "1,2,3\n4,5,7\n");
    EXPECT_EQ(cli({"spectrum", "--input", wide}).code, 1);
}

TEST_F(CliTest, MpCsv) {
    const CliRun r = cli({"mp", "--c", "0.3333333333333333", "--points", "5"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto lines = csv_lines(r.out);
    ASSERT_EQ(lines.size(), 6u);
    EXPECT_EQ(lines[0], "x,re,im,density");
    const CliRun wide = cli({"mp", "--c", "0.25", "--points", "3", "--from", "0.1", "--to", "3"});
    ASSERT_EQ(wide.code, 0);
    const auto w = csv_lines(wide.out);
    EXPECT_EQ(w[1].substr(0, 4), "0.1,");
    EXPECT_NE(w[3].find(",0,0"), std::string::npos);  // x=3 lies outside [0.25, 2.25]
    EXPECT_EQ(cli({"mp", "--c", "1.5"}).code, 2);
}

TEST_F(CliTest, FixturesGenFeedsTheOtherCommands) {
    const std::string out = (dir_ / "metro.csv").string();
    const CliRun g = cli({"fixtures", "gen", "--days", "50", "--stations", "10", "--seed", "4", "--output", out,
                       "--header"});
    ASSERT_EQ(g.code, 0) << g.err;
    const CliRun t = cli({"test", "--input", out, "--header", "--method", "decomposite"});
    EXPECT_EQ(t.code, 0) << t.err;
    const CliRun stdout_run = cli({"fixtures", "gen", "--days", "5", "--stations", "3"});
    EXPECT_EQ(csv_lines(stdout_run.out).size(), 5u);
}

#ifdef DECOMPOSITE_CLI_PATH
TEST_F(CliTest, BinaryExitCodes) {
    const std::string bin = DECOMPOSITE_CLI_PATH;
    auto status = [](const std::string& cmd) {
        const int raw = std::system((cmd + " >/dev/null 2>&1").c_str());
        return WEXITSTATUS(raw);
    };
    EXPECT_EQ(status(bin + " test --input " + data_), 0);
    EXPECT_EQ(status(bin + " test --input " + data_ + " --method nosuch"), 2);
    EXPECT_EQ(status(bin + " test --input " + (dir_ / "missing.csv").string()), 1);
}
#endif

}  // namespace
}  // namespace decomposite
