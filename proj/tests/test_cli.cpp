#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "cli.hpp"
#include "oracles.hpp"

using namespace qfid;

namespace {

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result run(std::vector<std::string> args) {
    args.insert(args.begin(), "qfid");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

class CliTest : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = oracle::temp_dir("cli");
        save_state(maximally_mixed(4), path("mixed4"));
        save_state(bell_phi_plus(), path("phi_plus"));
        const double h = 1.0 / std::sqrt(2.0);
        save_state(pure_state({h, 0.0, 0.0, -h}), path("phi_minus"));
        RandomStream rng(91, 0);
        save_state(random_mixed(2, rng), path("q1"));
        save_state(random_mixed(2, rng), path("q2"));
        save_state(random_mixed(4, rng), path("r1"));
        save_state(random_mixed(4, rng), path("r2"));
        oracle::write_file(dir_ / "bad_trace.json", R"({"matrix": [[1, 0], [0, 1]]})");
        oracle::write_file(dir_ / "broken.json", R"({"matrix": [[1, 0], )");
    }
    std::string path(const std::string& name) const { return (dir_ / (name + ".json")).string(); }
    std::filesystem::path dir_;
};

}  // namespace

TEST_F(CliTest, ReportMaximallyMixed) {
    const auto r = run({"report", path("mixed4"), path("mixed4")});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = json::parse(r.out);
    EXPECT_NEAR(j["report"]["fidelity"].get<double>(), 1.0, 1e-12);
    EXPECT_NEAR(j["report"]["superfidelity"].get<double>(), 1.0, 1e-14);
    EXPECT_NEAR(j["report"]["subfidelity"].get<double>(), 0.25 + std::sqrt(6.0) / 8.0, 1e-14);
    EXPECT_EQ(j["config"]["command"], "report");
}

TEST_F(CliTest, ReportOrthogonalBellStates) {
    const auto r = run({"report", path("phi_plus"), path("phi_minus")});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto rep = json::parse(r.out)["report"];
    for (const char* k : {"overlap", "fidelity", "subfidelity", "superfidelity"}) EXPECT_NEAR(rep[k].get<double>(), 0.0, 1e-7) << k;
}

TEST_F(CliTest, ReportQubitInputs) {
    const auto r = run({"report", path("q1"), path("q2")});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto rep = json::parse(r.out)["report"];
    ASSERT_TRUE(rep.contains("fidelity_qubit"));
    EXPECT_NEAR(rep["superfidelity"].get<double>(), rep["fidelity"].get<double>(), 1e-10);
}

TEST_F(CliTest, ReportCsvParses) {
    const auto r = run({"report", path("r1"), path("r2"), "--format", "csv"});
    ASSERT_EQ(r.code, 0) << r.err;
    std::istringstream s(r.out);
    std::string header, values;
    std::getline(s, header);
    std::getline(s, values);
    EXPECT_NE(header.find("report.fidelity"), std::string::npos);
    auto fields = [](const std::string& line) {
        std::size_t n = 1;
        bool quoted = false;
        for (char c : line) {
            if (c == '"') quoted = !quoted;
            if (c == ',' && !quoted) ++n;
        }
        return n;
    };
    EXPECT_EQ(fields(header), fields(values));
}

TEST_F(CliTest, InvalidInputsExitTwo) {
    auto r = run({"report", path("bad_trace"), path("mixed4")});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("trace"), std::string::npos);
    EXPECT_EQ(run({"report", path("broken"), path("mixed4")}).code, 2);
    EXPECT_EQ(run({"report", path("missing"), path("mixed4")}).code, 2);
    EXPECT_EQ(run({"report", path("mixed4"), path("q1")}).code, 2);
    EXPECT_EQ(run({"simulate", path("mixed4"), path("mixed4"), "--strategy", "mirror"}).code, 2);
    EXPECT_EQ(run({"simulate", path("mixed4"), path("mixed4"), "--eta", "0"}).code, 2);
    EXPECT_EQ(run({"mcfit", "--pairs", "10"}).code, 2);
    EXPECT_EQ(run({"frobnicate"}).code, 2);
}

TEST_F(CliTest, SimulateBellPair) {
    const auto r = run({"simulate", path("phi_plus"), path("phi_plus"), "--rounds", "100000", "--seed", "4"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto t = json::parse(r.out)["tally"];
    EXPECT_LE(std::abs(t["estimate"].get<double>() - 1.0), 4 * t["stderr"].get<double>());
    EXPECT_EQ(t["order"], 1);
}

TEST_F(CliTest, SimulateReportsStrategyMetadata) {
    const auto r = run({"simulate", path("r1"), path("r2"), "--strategy", "shifted-bs", "--rounds", "20000"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = json::parse(r.out);
    EXPECT_EQ(j["tally"]["max_success_probability"], 0.625);
    EXPECT_EQ(j["config"]["strategy"], "shifted-bs");
}

TEST_F(CliTest, SimulateAgreesWithReport) {
    const auto rep = json::parse(run({"report", path("r1"), path("r2")}).out)["report"];
    const auto r = run({"simulate", path("r1"), path("r2"), "--rounds", "200000", "--strategy", "removable-bs"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto t = json::parse(r.out)["tally"];
    EXPECT_LE(std::abs(t["estimate"].get<double>() - rep["overlap"].get<double>()), 4 * t["stderr"].get<double>());
}

TEST_F(CliTest, InconclusiveExitsThree) {
    const auto r = run({"simulate", path("mixed4"), path("mixed4"), "--eta", "0.01", "--rounds", "2"});
    EXPECT_EQ(r.code, 3);
    EXPECT_EQ(json::parse(r.out)["tally"]["K0"], 0);
}

TEST_F(CliTest, Simulate2MaximallyMixed) {
    const auto r = run({"simulate2", path("mixed4"), path("mixed4"), "--rounds", "50000"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto t = json::parse(r.out)["tally"];
    EXPECT_EQ(t["order"], 2);
    EXPECT_LE(std::abs(t["estimate"].get<double>() - 1.0 / 64.0), 4 * t["stderr"].get<double>());
}

TEST_F(CliTest, McfitDeterministicAndScatterBounded) {
    const auto scatter = (dir_ / "scatter.csv").string();
    const auto dataset = (dir_ / "dataset.csv").string();
    const std::vector<std::string> args{"mcfit", "--pairs", "1000", "--seed", "7", "--scatter", scatter, "--dataset", dataset};
    const auto a = run(args);
    ASSERT_EQ(a.code, 0) << a.err;
    const auto first_scatter = oracle::read_file(scatter);
    const auto b = run(args);
    EXPECT_EQ(a.out, b.out);
    EXPECT_EQ(first_scatter, oracle::read_file(scatter));

    const auto j = json::parse(a.out);
    EXPECT_LE(j["optimum"]["delta"].get<double>(), j["arithmetic"]["delta"].get<double>());
    EXPECT_EQ(j["panels"].size(), 4u);

    std::istringstream s(first_scatter);
    std::string line;
    std::getline(s, line);
    EXPECT_EQ(line, "panel,index,F,Fbar,E,G");
    std::size_t rows = 0;
    while (std::getline(s, line)) {
        std::vector<std::string> f;
        std::stringstream ls(line);
        for (std::string x; std::getline(ls, x, ',');) f.push_back(x);
        ASSERT_EQ(f.size(), 6u);
        const double fbar = parse_double(f[3]), e = parse_double(f[4]), g = parse_double(f[5]);
        EXPECT_GE(fbar, e);
        EXPECT_LE(fbar, g);
        ++rows;
    }
    EXPECT_EQ(rows, 4000u);
    std::ifstream ds(dataset);
    EXPECT_EQ(read_dataset_csv(ds).size(), 1000u);
}

TEST_F(CliTest, KernelSelftestPasses) {
    const auto r = run({"kernel-selftest", "--pairs", "50"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_TRUE(json::parse(r.out)["passed"].get<bool>());
}

TEST_F(CliTest, WritesToOutFile) {
    const auto out = (dir_ / "report.json").string();
    ASSERT_EQ(run({"report", path("r1"), path("r2"), "--out", out}).code, 0);
    EXPECT_TRUE(json::parse(oracle::read_file(out)).contains("report"));
}
