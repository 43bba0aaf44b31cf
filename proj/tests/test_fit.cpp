#include "support.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <limits>
#include <numeric>
#include <random>

using namespace misfit;
using namespace misfit::testing;

TEST(FitConfig, Validation) {
    FitConfig c;
    EXPECT_NO_THROW(c.validate());
    c.max_iterations = 0;
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c = {};
    c.gradient_tolerance = -1;
    EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(FitMle, WellSpecifiedRecoversBeta) {
    const Vector beta = vec({0.5, -1.0});
    const Dataset d = draw(uniform(-2, 2), logistic_truth(beta), 100000, 11);
    const FitResult f = fit_mle(Link::Logistic, d);
    ASSERT_TRUE(f.converged);
    EXPECT_EQ(f.status, FitStatus::Converged);
    EXPECT_LE((f.beta_hat - beta).lpNorm<Eigen::Infinity>(), 0.05);
    EXPECT_LE(f.final_score_norm, 1e-9);
    EXPECT_LE(score(Link::Logistic, f.beta_hat, d).lpNorm<Eigen::Infinity>(), 1e-9);
}

TEST(FitMle, SeparatedDataIsReported) {
    const Dataset d = validate_dataset({{-1, 0}, {1, 1}});
    const FitResult f = fit_mle(Link::Logistic, d);
    EXPECT_FALSE(f.converged);
    EXPECT_EQ(f.status, FitStatus::SeparationSuspected);
    const FitResult p = fit_mle(Link::Probit, d);
    EXPECT_EQ(p.status, FitStatus::SeparationSuspected);

    // Quasi-complete separation on a larger sample.
    std::vector<std::vector<double>> rows;
    for (int i = 0; i < 50; ++i) rows.push_back({-1.0 - i * 0.01, 0});
    for (int i = 0; i < 50; ++i) rows.push_back({0.5 + i * 0.01, 1});
    EXPECT_EQ(fit_mle(Link::Logistic, validate_dataset(rows)).status, FitStatus::SeparationSuspected);
}

TEST(FitMle, InterceptOnlyClosedForm) {
    for (auto [k, n] : {std::pair{3, 10}, std::pair{50, 100}, std::pair{1, 7}}) {
        Vector z = Vector::Zero(n);
        z.head(k).setOnes();
        const Dataset d(Matrix::Ones(n, 1), z);
        const FitResult f = fit_mle(Link::Logistic, d);
        ASSERT_TRUE(f.converged);
        EXPECT_NEAR(f.beta_hat[0], std::log(double(k) / (n - k)), 1e-9);
        const FitResult p = fit_mle(Link::Probit, d);
        EXPECT_NEAR(p.beta_hat[0], normal_quantile(double(k) / n), 1e-9);
    }
}

TEST(FitMle, SingularDesign) {
    Matrix x(4, 3);
    x << 1, 1, 2, 1, 2, 4, 1, 3, 6, 1, 4, 8;
    const Dataset d(x, vec({0, 1, 0, 1}));
    const FitResult f = fit_mle(Link::Logistic, d);
    EXPECT_EQ(f.status, FitStatus::SingularInformation);
    EXPECT_FALSE(f.converged);
}

TEST(FitMle, UniqueOptimumFromRandomStarts) {
    const Dataset d = random_dataset(12, 500, vec({0.3, -0.8, 0.5}));
    for (Link link : {Link::Logistic, Link::Probit}) {
        const FitResult ref = fit_mle(link, d);
        ASSERT_TRUE(ref.converged);
        std::mt19937_64 gen(13);
        std::normal_distribution<double> normal(0.0, 2.0);
        for (int s = 0; s < 20; ++s) {
            FitConfig c;
            c.initial_beta = vec({normal(gen), normal(gen), normal(gen)});
            const FitResult f = fit_mle(link, d, c);
            ASSERT_TRUE(f.converged);
            EXPECT_LE((f.beta_hat - ref.beta_hat).lpNorm<Eigen::Infinity>(), 1e-6);
            for (std::size_t k = 1; k < f.objective_trace.size(); ++k)
                EXPECT_GE(f.objective_trace[k],
                          f.objective_trace[k - 1] - 8 * std::numeric_limits<double>::epsilon() *
                                                         std::max(1.0, std::abs(f.objective_trace[k - 1])));
        }
    }
}

TEST(FitMle, WeightScalingAndPermutationInvariance) {
    const Dataset d = random_dataset(14, 1000, vec({-0.2, 0.6, 1.0}));
    std::mt19937_64 gen(15);
    std::uniform_real_distribution<double> unif(0.1, 3.0);
    Vector w(d.size());
    for (auto& v : w) v = unif(gen);
    const FitResult a = fit_mle(Link::Logistic, d.with_weights(w));
    const FitResult b = fit_mle(Link::Logistic, d.with_weights(7.5 * w));
    EXPECT_LE((a.beta_hat - b.beta_hat).lpNorm<Eigen::Infinity>(), 1e-9);

    std::vector<Eigen::Index> order(static_cast<std::size_t>(d.size()));
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), gen);
    Matrix x(d.size(), d.dim());
    Vector z(d.size());
    for (Eigen::Index i = 0; i < d.size(); ++i) {
        x.row(i) = d.covariates().row(order[static_cast<std::size_t>(i)]);
        z[i] = d.outcomes()[order[static_cast<std::size_t>(i)]];
    }
    const FitResult c = fit_mle(Link::Logistic, d);
    const FitResult p = fit_mle(Link::Logistic, Dataset(x, z));
    EXPECT_LE((c.beta_hat - p.beta_hat).lpNorm<Eigen::Infinity>(), 1e-9);
}

TEST(FitMle, Deterministic) {
    const Dataset d = random_dataset(16, 700, vec({0.1, 0.2}));
    const FitResult a = fit_mle(Link::Probit, d), b = fit_mle(Link::Probit, d);
    EXPECT_EQ(a.beta_hat, b.beta_hat);
    EXPECT_EQ(a.iterations, b.iterations);
}

TEST(FitLocal, HugeBandwidthRecoversGlobalFit) {
    const Dataset d = random_dataset(17, 2000, vec({0.4, -0.7}));
    const FitResult global = fit_mle(Link::Logistic, d);
    const FitResult local = fit_local(Link::Logistic, d, CovariateVector(vec({1, 0.3})),
                                      KernelSpec{KernelKind::Gaussian, vec({1e6})});
    ASSERT_TRUE(local.converged);
    EXPECT_LE((local.beta_hat - global.beta_hat).lpNorm<Eigen::Infinity>(), 1e-6);
}

TEST(FitLocal, InsufficientLocalMass) {
    const Dataset d = validate_dataset({{0.0, 1}, {0.1, 0}, {5.0, 1}, {6.0, 0}, {7.0, 1}});
    try {
        fit_local(Link::Logistic, d, CovariateVector(vec({1, 0.05})), KernelSpec{KernelKind::Uniform, vec({0.5})});
        FAIL();
    } catch (const LocalMassError& e) {
        EXPECT_NE(std::string(e.what()).find("insufficient local mass"), std::string::npos);
    }
}

TEST(FitLocal, PiecewiseLogisticSlopesBracketRegimes) {
    const TrueModel truth(PiecewiseLogistic{0, {0.0}, {vec({0, 1}), vec({0, 3})}});
    const Dataset d = draw(uniform(-2, 2), truth, 100000, 18);
    const KernelSpec spec{KernelKind::Gaussian, vec({0.3})};
    const FitResult left = fit_local(Link::Logistic, d, CovariateVector(vec({1, -1})), spec);
    const FitResult right = fit_local(Link::Logistic, d, CovariateVector(vec({1, 1})), spec);
    EXPECT_NEAR(left.beta_hat[1], 1.0, 0.3);
    EXPECT_NEAR(right.beta_hat[1], 3.0, 0.3);
}

TEST(LocalCurve, WellSpecifiedTracksTruth) {
    const Vector beta = vec({0.5, -1.0});
    const Dataset d = draw(uniform(-2, 2), logistic_truth(beta), 100000, 19);
    std::vector<CovariateVector> grid;
    for (int k = 0; k < 21; ++k) grid.push_back(CovariateVector(vec({1, -1.8 + 3.6 * k / 20})));
    const auto curve = local_probability_curve(Link::Logistic, d, grid, KernelSpec{KernelKind::Gaussian, vec({0.5})});
    ASSERT_EQ(curve.size(), 21u);
    for (const auto& p : curve) {
        ASSERT_TRUE(p.ok()) << p.error;
        EXPECT_NEAR(p.probability, mean_response(Link::Logistic, beta, p.x), 0.05);
    }
}

TEST(LocalCurve, ConstantTruthAndEdgeCases) {
    const Dataset d = draw(uniform(-2, 2), TrueModel(StepFunction{0, {}, {0.5}}), 10000, 20);
    std::vector<CovariateVector> grid;
    for (int k = 0; k < 11; ++k) grid.push_back(CovariateVector(vec({1, -1.5 + 0.3 * k})));
    for (const auto& p : local_probability_curve(Link::Logistic, d, grid, KernelSpec{KernelKind::Gaussian, vec({0.5})})) {
        EXPECT_GE(p.probability, 0.45);
        EXPECT_LE(p.probability, 0.55);
    }
    EXPECT_TRUE(local_probability_curve(Link::Logistic, d, {}, KernelSpec{KernelKind::Gaussian, vec({0.5})}).empty());

    // A point with no local mass fails on its own; the others still run.
    const auto mixed = local_probability_curve(Link::Logistic, d, {CovariateVector(vec({1, 0})), CovariateVector(vec({1, 50}))},
                                               KernelSpec{KernelKind::Uniform, vec({0.5})});
    EXPECT_TRUE(mixed[0].ok());
    EXPECT_FALSE(mixed[1].ok());
    EXPECT_TRUE(std::isnan(mixed[1].probability));
}

TEST(Bayes, CloseToMleForWidePriors) {
    const Dataset d = draw(uniform(-2, 2), logistic_truth(vec({0.5, -1.0})), 10000, 21);
    const FitResult mle = fit_mle(Link::Logistic, d);
    const BayesEstimate b10 = fit_bayes_posterior_mean(Link::Logistic, d, {vec({0, 0}), vec({10, 10})}, 4000, 5);
    const BayesEstimate b50 = fit_bayes_posterior_mean(Link::Logistic, d, {vec({0, 0}), vec({50, 50})}, 4000, 6);
    EXPECT_LE((b10.posterior_mean - mle.beta_hat).lpNorm<Eigen::Infinity>(), 0.02);
    EXPECT_LE((b10.posterior_mean - b50.posterior_mean).lpNorm<Eigen::Infinity>(), 0.02);
    EXPECT_GE(b10.effective_sample_size, kMinImportanceEss);

    const Dataset s1 = draw(s1_covariates(), s1_truth(), 10000, 22);
    const FitResult m1 = fit_mle(Link::Logistic, s1);
    const BayesEstimate bs = fit_bayes_posterior_mean(Link::Logistic, s1, {vec({0, 0}), vec({10, 10})}, 4000, 7);
    EXPECT_LE((bs.posterior_mean - m1.beta_hat).lpNorm<Eigen::Infinity>(), 0.05);
}

TEST(Bayes, DeterministicAndGuarded) {
    const Dataset d = draw(uniform(-2, 2), logistic_truth(vec({0.5, -1.0})), 2000, 23);
    const PriorSpec prior{vec({0, 0}), vec({10, 10})};
    const auto a = fit_bayes_posterior_mean(Link::Logistic, d, prior, 2000, 99);
    const auto b = fit_bayes_posterior_mean(Link::Logistic, d, prior, 2000, 99);
    EXPECT_EQ(a.posterior_mean, b.posterior_mean);
    // A prior sharply concentrated far from the likelihood collapses the weights.
    EXPECT_THROW(fit_bayes_posterior_mean(Link::Logistic, d, {vec({30, 30}), vec({1e-3, 1e-3})}, 2000, 1),
                 ImportanceSamplingError);
    const Dataset wide = random_dataset(24, 500, Vector::Zero(7));
    EXPECT_THROW(fit_bayes_posterior_mean(Link::Logistic, wide, {Vector::Zero(7), Vector::Constant(7, 10)}, 500, 1),
                 DimensionError);
}
