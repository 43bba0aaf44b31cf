#include "support.hpp"

#include "misfit/report.hpp"

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <algorithm>
#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace misfit;
using namespace misfit::testing;
namespace fs = std::filesystem;

namespace {

const fs::path kSource = MISFIT_SOURCE_DIR;
const fs::path kWork = MISFIT_WORK_DIR;

struct CliRun {
    int code = -1;
    std::string out;
};

CliRun run(const std::string& args) {
    fs::create_directories(kWork);
    const std::string cmd = std::string(MISFIT_CLI) + " " + args + " 2>/dev/null";
    CliRun r;
    FILE* pipe = popen(cmd.c_str(), "r");
    if (!pipe) return r;
    std::array<char, 4096> buf{};
    std::size_t got;
    while ((got = fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), got);
    const int status = pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::string data(const std::string& name) { return (kSource / "tests" / "data" / name).string(); }
std::string scenario(const std::string& name) { return (kSource / "scenarios" / name).string(); }

fs::path write_file(const std::string& name, const std::string& text) {
    fs::create_directories(kWork);
    const fs::path p = kWork / name;
    std::ofstream(p) << text;
    return p;
}

fs::path s1_sample() {
    const fs::path p = kWork / "s1_sample.csv";
    fs::create_directories(kWork);
    std::ofstream out(p);
    write_csv_dataset(out, draw(s1_covariates(), s1_truth(), 4000, 81));
    return p;
}

const std::string kSmallS1 = R"([scenario]
name = small
n = 500
replications = 20
seed = 9

[covariates]
kind = finite
points = -1 | 0 | 1
probabilities = 1/3, 1/3, 1/3

[truth]
kind = step
covariate = 1
thresholds = 0
values = 0.2, 0.9

[estimator.mle]
kind = mle
)";

}  // namespace

TEST(CliFit, ReportsBothFlavors) {
    const CliRun r = run("fit " + data("toy.csv"));
    ASSERT_EQ(r.code, 0) << r.out;
    const Json j = Json::parse(r.out);
    EXPECT_EQ(j["result"]["status"], "Converged");
    ASSERT_EQ(j["result"]["coefficients"].size(), 3u);
    for (const auto& c : j["result"]["coefficients"]) {
        EXPECT_TRUE(c.contains("naive_se"));
        EXPECT_TRUE(c.contains("sandwich_se"));
        EXPECT_TRUE(c.contains("naive_interval"));
        EXPECT_TRUE(c.contains("sandwich_interval"));
    }
    EXPECT_TRUE(j.contains("config"));

    const CliRun p = run("fit --link probit " + data("toy.csv"));
    ASSERT_EQ(p.code, 0);
    const Json jp = Json::parse(p.out);
    EXPECT_NE(jp["result"]["beta_hat"], j["result"]["beta_hat"]);

    const CliRun csv = run("fit --format csv " + data("toy.csv"));
    ASSERT_EQ(csv.code, 0);
    EXPECT_NE(csv.out.find("sandwich_se"), std::string::npos);
}

TEST(CliFit, MatchesLibrary) {
    const CliRun r = run("fit " + data("toy.csv"));
    const Json j = Json::parse(r.out);
    const FitResult f = fit_mle(Link::Logistic, read_csv_dataset(data("toy.csv")));
    for (Eigen::Index k = 0; k < 3; ++k) EXPECT_EQ(j["result"]["beta_hat"][k].get<double>(), f.beta_hat[k]);
}

TEST(CliFit, ErrorExitCodes) {
    const CliRun sep = run("fit " + data("separated.csv"));
    EXPECT_EQ(sep.code, 3);
    const Json j = Json::parse(sep.out);
    EXPECT_EQ(j["error"]["kind"], "fit");
    EXPECT_EQ(j["error"]["detail"]["status"], "SeparationSuspected");

    EXPECT_EQ(run("fit " + data("bad_header.csv")).code, 2);
    const CliRun bad = run("fit " + data("bad_value.csv"));
    EXPECT_EQ(bad.code, 2);
    EXPECT_EQ(Json::parse(bad.out)["error"]["kind"], "parse");
    EXPECT_EQ(run("fit --no-such-flag " + data("toy.csv")).code, 2);
    EXPECT_EQ(run("fit /nonexistent/file.csv").code, 2);
}

TEST(CliOracle, S1AndMasses) {
    const CliRun r = run("oracle " + scenario("s1.ini"));
    ASSERT_EQ(r.code, 0) << r.out;
    const Json j = Json::parse(r.out);
    const LeastFalseResult o = least_false(Link::Logistic, s1_covariates(), s1_truth());
    const Json& lf = j["least_false"];
    EXPECT_NEAR(lf["beta0"][0].get<double>(), o.beta0[0], 1e-8);
    EXPECT_NEAR(lf["beta0"][1].get<double>(), o.beta0[1], 1e-8);
    for (const char* key : {"delta_at_beta0", "population_J", "population_K", "population_sandwich",
                            "integration_error_estimate"})
        EXPECT_TRUE(lf.contains(key)) << key;
    EXPECT_TRUE(j["config"].contains("scenario"));

    const Json m = Json::parse(run("oracle " + scenario("s1_masses.ini")).out);
    EXPECT_NE(m["least_false"]["beta0"], lf["beta0"]);

    const Json w = Json::parse(run("oracle " + scenario("well_specified.ini")).out);
    EXPECT_LE(w["least_false"]["delta_at_beta0"].get<double>(),
              std::max(1e-12, w["least_false"]["integration_error_estimate"].get<double>()));
}

TEST(CliOracle, DivergenceExitsFour) {
    std::string text = kSmallS1;
    text.replace(text.find("values = 0.2, 0.9"), 17, "values = 1, 1");
    const fs::path p = write_file("ones.ini", text);
    const CliRun r = run("oracle " + p.string());
    EXPECT_EQ(r.code, 4);
    EXPECT_EQ(Json::parse(r.out)["error"]["kind"], "oracle");
    std::string broken = kSmallS1;
    broken.replace(broken.find("n = 500"), 7, "n = many");
    EXPECT_EQ(run("oracle " + write_file("broken.ini", broken).string()).code, 2);
}

TEST(CliSimulate, OutputsAndDeterminism) {
    const fs::path sc = write_file("small.ini", kSmallS1);
    const fs::path j1 = kWork / "sim1.json", c1 = kWork / "sim1.csv", j2 = kWork / "sim2.json", c2 = kWork / "sim2.csv";
    ASSERT_EQ(run("simulate " + sc.string() + " --json " + j1.string() + " --csv " + c1.string()).code, 0);
    ASSERT_EQ(run("simulate " + sc.string() + " --json " + j2.string() + " --csv " + c2.string()).code, 0);
    EXPECT_EQ(Json::parse(slurp(j1))["summary"].dump(), Json::parse(slurp(j2))["summary"].dump());
    EXPECT_EQ(slurp(c1), slurp(c2));
    const Json j = Json::parse(slurp(j1));
    const Json& e = j["summary"]["estimators"][0];
    EXPECT_TRUE(e.contains("scaled_covariance"));
    EXPECT_TRUE(e.contains("oracle"));
    EXPECT_EQ(j["summary"]["seed"], 9);
    EXPECT_EQ(j["config"]["scenario_config"]["n"], 500);
    const std::string csv = slurp(c1);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "replication,estimator,beta_0,beta_1,converged,flags");
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 21);

    const CliRun other = run("simulate " + sc.string() + " --seed 10 --json " + (kWork / "sim3.json").string());
    ASSERT_EQ(other.code, 0);
    EXPECT_NE(Json::parse(slurp(kWork / "sim3.json"))["summary"].dump(), Json::parse(slurp(j1))["summary"].dump());
}

TEST(CliSimulate, SingleReplicationFlagged) {
    const fs::path sc = write_file("small1.ini", kSmallS1);
    const CliRun r = run("simulate " + sc.string() + " --replications 1");
    ASSERT_EQ(r.code, 0);
    const Json j = Json::parse(r.out);
    EXPECT_TRUE(j["summary"]["covariance_undefined"].get<bool>());
}

TEST(CliSimulate, BudgetExitsFive) {
    const fs::path sc = write_file("tiny.ini", kSmallS1);
    const CliRun r = run("simulate " + sc.string() + " --n 3 --replications 100");
    EXPECT_EQ(r.code, 5);
    EXPECT_EQ(Json::parse(r.out)["error"]["kind"], "budget");
}

TEST(CliSimulate, VerdictLines) {
    std::string text = kSmallS1 + "\n[checks]\nsandwich_coverage = 0.5, 1\n";
    const fs::path sc = write_file("checked.ini", text);
    const CliRun r = run("simulate " + sc.string() + " --json " + (kWork / "checked.json").string());
    ASSERT_EQ(r.code, 0);
    EXPECT_NE(r.out.find("PASS sandwich-coverage"), std::string::npos) << r.out;
}

TEST(CliGoftest, DeterministicReport) {
    const fs::path p = s1_sample();
    const CliRun a = run("goftest " + p.string() + " --seed 4 --replicates 200");
    const CliRun b = run("goftest " + p.string() + " --seed 4 --replicates 200");
    ASSERT_EQ(a.code, 0) << a.out;
    EXPECT_EQ(a.out, b.out);
    const Json j = Json::parse(a.out);
    EXPECT_GE(j["result"]["statistic"].get<double>(), 0.0);
    EXPECT_LT(j["result"]["p_value"].get<double>(), 0.05);
    EXPECT_EQ(j["result"]["bootstrap_replicates"], 200);
    EXPECT_TRUE(j["result"].contains("dropped_replicates"));
    EXPECT_EQ(run("goftest " + p.string() + " --replicates 200").code, 2);
    EXPECT_NE(run("goftest " + p.string() + " --seed 4 --replicates 50").code, 0);
}

TEST(CliLocalCurve, RowsAndFlags) {
    const fs::path p = s1_sample();
    const CliRun r = run("local-curve " + p.string() + " --grid -1:1:3 --bandwidth 0.5");
    ASSERT_EQ(r.code, 0) << r.out;
    std::istringstream in(r.out);
    std::string header, line;
    std::getline(in, header);
    EXPECT_EQ(header, "x_1,q_star,beta_0,beta_1,ok,error");
    int rows = 0;
    while (std::getline(in, line)) ++rows;
    EXPECT_EQ(rows, 3);

    // A far point fails on its own row with a uniform kernel; the run continues.
    const CliRun mixed = run("local-curve " + p.string() + " --grid '0|50' --kernel uniform --bandwidth 1.5");
    ASSERT_EQ(mixed.code, 0);
    EXPECT_NE(mixed.out.find("insufficient local mass"), std::string::npos);
    EXPECT_EQ(run("local-curve " + p.string() + " --grid '40|50' --kernel uniform --bandwidth 0.5").code, 3);
    EXPECT_EQ(run("local-curve " + p.string() + " --grid -1:1:3").code, 2);
}

TEST(CliDensityRatio, Grid) {
    const MixtureModel m = mixture_truth(
        TwoClassMixture{0.5, 0.5, ProductGaussian{vec({-1.0}), vec({1.0})}, ProductGaussian{vec({1.0}), vec({1.0})}});
    const fs::path p = kWork / "mixture.csv";
    {
        std::ofstream out(p);
        write_csv_dataset(out, draw(m.H, m.truth, 2000, 82));
    }
    const CliRun r = run("density-ratio " + p.string() + " --grid -2:2:5");
    ASSERT_EQ(r.code, 0) << r.out;
    std::istringstream in(r.out);
    std::string line;
    std::getline(in, line);
    EXPECT_NE(line.find("q_hat"), std::string::npos);
    int rows = 0;
    while (std::getline(in, line)) ++rows;
    EXPECT_EQ(rows, 5);
}
