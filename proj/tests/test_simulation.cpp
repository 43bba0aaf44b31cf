#include "support.hpp"

#include "misfit/report.hpp"

#include <gtest/gtest.h>

using namespace misfit;
using namespace misfit::testing;

namespace {

Scenario s1_scenario(Eigen::Index n, std::size_t reps, std::uint64_t seed) {
    Scenario s("s1", s1_covariates(), s1_truth());
    s.n = n;
    s.replications = reps;
    s.seed = seed;
    s.estimators.push_back({"mle", MleEstimator{}});
    return s;
}

}  // namespace

TEST(DrawDataset, DegenerateAndConstantTruths) {
    const Dataset ones = draw(uniform(-1, 1), TrueModel(StepFunction{0, {}, {1.0}}), 1000, 61);
    EXPECT_EQ(ones.outcomes().sum(), 1000.0);
    const Dataset third = draw(uniform(-1, 1), TrueModel(StepFunction{0, {}, {0.3}}), 100000, 62);
    EXPECT_NEAR(third.outcomes().mean(), 0.3, 0.01);
    EXPECT_EQ(third.dim(), 2);
    EXPECT_GE(third.covariates().col(1).minCoeff(), -1.0);
    EXPECT_LE(third.covariates().col(1).maxCoeff(), 1.0);
}

TEST(DrawDataset, DeterministicPerReplication) {
    const Scenario s = s1_scenario(500, 3, 63);
    const Dataset a = draw_dataset(s, 2), b = draw_dataset(s, 2), c = draw_dataset(s, 1);
    EXPECT_EQ(a.covariates(), b.covariates());
    EXPECT_EQ(a.outcomes(), b.outcomes());
    EXPECT_NE(a.outcomes(), c.outcomes());
    std::ostringstream x, y;
    write_csv_dataset(x, a);
    write_csv_dataset(y, b);
    EXPECT_EQ(x.str(), y.str());
}

TEST(DrawDataset, MatchesCovariateMasses) {
    const Dataset d = draw(s1_covariates(0.6, 0.2, 0.2), s1_truth(), 100000, 64);
    const double neg = (d.covariates().col(1).array() < 0).cast<double>().mean();
    EXPECT_NEAR(neg, 0.6, 0.01);
}

TEST(Scenario, Validation) {
    Scenario s = s1_scenario(3, 1, 1);
    EXPECT_NO_THROW(s.validate());
    s.n = 2;
    EXPECT_THROW(s.validate(), std::exception);
    s = s1_scenario(10, 0, 1);
    EXPECT_THROW(s.validate(), std::exception);
    s = s1_scenario(10, 1, 1);
    s.estimators.clear();
    EXPECT_THROW(s.validate(), std::exception);
    s = s1_scenario(10, 1, 1);
    s.coverage_levels = {1.0};
    EXPECT_THROW(s.validate(), std::exception);
}

TEST(RunExperiment, SummaryInvariants) {
    Scenario s = s1_scenario(1000, 60, 65);
    s.estimators.push_back({"unit", WeightedMleEstimator{WeightSpec::unit()}});
    s.coverage_levels = {0.9, 0.95};
    const ReplicationSummary r = run_experiment(s);
    ASSERT_EQ(r.estimators.size(), 2u);
    EXPECT_FALSE(r.covariance_undefined);
    EXPECT_EQ(r.records.size(), 120u);
    const EstimatorSummary& e = r.estimators[0];
    EXPECT_EQ(e.successes, 60u);
    ASSERT_TRUE(e.oracle.has_value());
    EXPECT_LE((*e.target - least_false(Link::Logistic, s1_covariates(), s1_truth()).beta0).lpNorm<Eigen::Infinity>(),
              1e-12);
    ASSERT_TRUE(e.scaled_covariance.has_value());
    EXPECT_GE(Eigen::SelfAdjointEigenSolver<Matrix>(*e.scaled_covariance).eigenvalues().minCoeff(), -1e-12);
    ASSERT_EQ(e.coverage.size(), 4u);
    for (const CoverageCount& c : e.coverage)
        for (std::size_t k = 0; k < c.covered.size(); ++k) {
            EXPECT_LE(c.covered[k], e.successes);
            EXPECT_DOUBLE_EQ(c.rate[k], double(c.covered[k]) / e.successes);
        }
    // Every estimator sees the same dataset: a unit-weight fit equals the plain fit.
    for (std::size_t i = 0; i < r.records.size(); i += 2) {
        EXPECT_EQ(r.records[i].replication, r.records[i + 1].replication);
        EXPECT_EQ(r.records[i].estimate, r.records[i + 1].estimate);
    }
    // Independently recomputed mean and scaled covariance.
    Matrix est(60, 2);
    for (std::size_t i = 0; i < 60; ++i) est.row(static_cast<Eigen::Index>(i)) = r.records[2 * i].estimate.transpose();
    const Vector mean = est.colwise().mean();
    EXPECT_LT((mean - e.mean).lpNorm<Eigen::Infinity>(), 1e-12);
    const Matrix centered = est.rowwise() - mean.transpose();
    const Matrix cov = centered.transpose() * centered / 59.0 * 1000.0;
    EXPECT_LT(max_abs(cov - *e.scaled_covariance), 1e-9);
}

TEST(RunExperiment, DeterministicBytes) {
    Scenario s = s1_scenario(400, 20, 66);
    s.estimators.push_back({"local", LocalEstimator{vec({0.0}), KernelSpec{KernelKind::Gaussian, vec({1.0})}}});
    const std::string a = to_json(run_experiment(s)).dump();
    const std::string b = to_json(run_experiment(s)).dump();
    EXPECT_EQ(a, b);
    s.seed = 67;
    EXPECT_NE(a, to_json(run_experiment(s)).dump());
}

TEST(RunExperiment, SingleReplicationIsDegenerate) {
    const ReplicationSummary r = run_experiment(s1_scenario(300, 1, 68));
    EXPECT_TRUE(r.covariance_undefined);
    EXPECT_FALSE(r.estimators[0].scaled_covariance.has_value());
    EXPECT_EQ(r.records.size(), 1u);
}

TEST(RunExperiment, FailureBudget) {
    // n = 3 on three support points separates in most replications.
    EXPECT_THROW(run_experiment(s1_scenario(3, 100, 69)), BudgetExceededError);
}

TEST(RunExperiment, WeightedEstimatorTargetsWeightedOracle) {
    Scenario s = s1_scenario(2000, 10, 70);
    s.estimators = {{"pos", WeightedMleEstimator{WeightSpec::indicator(0, 0.0, INFINITY)}}};
    const ReplicationSummary r = run_experiment(s);
    EXPECT_NEAR((*r.estimators[0].target)[0], std::log(9.0), 1e-9);
    EXPECT_NEAR((*r.estimators[0].target)[1], 0.0, 1e-9);
}

TEST(RunExperiment, DensityRatioAndGroupwise) {
    const TwoClassMixture mix{0.5, 0.5, ProductGaussian{vec({-1.0}), vec({1.0})}, ProductGaussian{vec({1.0}), vec({1.0})}};
    const MixtureModel m = mixture_truth(mix);
    Scenario s("mix", m.H, m.truth);
    s.n = 2000;
    s.replications = 4;
    s.seed = 71;
    s.estimators = {{"kde", DensityRatioEstimator{KernelKind::Gaussian, {}, {}, {vec({-1.0}), vec({0.0}), vec({1.0})}}},
                    {"lda", GaussianGroupwiseEstimator{}}};
    s.checks.max_mean_abs_deviation = 0.1;
    const ReplicationSummary r = run_experiment(s);
    const EstimatorSummary& kde = r.estimators[0];
    ASSERT_TRUE(kde.target.has_value());
    EXPECT_NEAR((*kde.target)[1], 0.5, 1e-15);
    ASSERT_TRUE(kde.mean_abs_deviation.has_value());
    EXPECT_LT(*kde.mean_abs_deviation, 0.1);
    const EstimatorSummary& lda = r.estimators[1];
    EXPECT_LE((*lda.target - gaussian_log_ratio_coefficients(mix)).lpNorm<Eigen::Infinity>(), 1e-14);
    EXPECT_LE((lda.mean - *lda.target).lpNorm<Eigen::Infinity>(), 0.3);
    const auto verdicts = evaluate_checks(s, r);
    ASSERT_EQ(verdicts.size(), 1u);
    EXPECT_TRUE(verdicts[0].passed) << verdicts[0].detail;
}

TEST(ConvergenceCurve, ShrinksWithN) {
    const Scenario s = s1_scenario(100, 1, 72);
    EXPECT_EQ(convergence_curve(s, {500}, 20).size(), 1u);
    const auto curve = convergence_curve(s, {500, 2000, 8000}, 500);
    ASSERT_EQ(curve.size(), 3u);
    EXPECT_GT(curve[0].mean_deviation, curve[1].mean_deviation);
    EXPECT_GT(curve[1].mean_deviation, curve[2].mean_deviation);
    EXPECT_LE(curve[2].covariance_error, curve[0].covariance_error);
}

TEST(EvaluateChecks, CoverageBandsOnWellSpecified) {
    Scenario s("well", uniform(-2, 2), logistic_truth(vec({0.5, -1.0})));
    s.n = 1000;
    s.replications = 400;
    s.seed = 73;
    s.estimators = {{"mle", MleEstimator{}}};
    s.checks.mean_within_se = 3.0;
    s.checks.sandwich_coverage = std::pair{0.92, 0.98};
    s.checks.naive_coverage = std::pair{0.92, 0.98};
    const ReplicationSummary r = run_experiment(s);
    const auto v = evaluate_checks(s, r);
    ASSERT_EQ(v.size(), 3u);
    for (const CheckVerdict& c : v) EXPECT_TRUE(c.passed) << c.check << ": " << c.detail;
}
