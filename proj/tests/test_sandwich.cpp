#include "support.hpp"

#include "misfit/linalg.hpp"

#include <gtest/gtest.h>

using namespace misfit;
using namespace misfit::testing;

namespace {

double rel_asym(const Matrix& m) { return max_abs(m - m.transpose()) / std::max(1e-300, max_abs(m)); }

}  // namespace

TEST(JHat, Examples) {
    const Dataset d = random_dataset(31, 300, vec({0.2, 0.4, -0.3}));
    Matrix xx = d.covariates().transpose() * d.covariates();
    EXPECT_LT(max_abs(estimate_J_hat(Link::Logistic, vec({0, 0, 0}), d) - xx / (4.0 * d.size())), 1e-14);
    const Vector b = vec({0.1, -0.5, 0.7});
    for (Link link : {Link::Logistic, Link::Probit})
        EXPECT_EQ(estimate_J_hat(link, b, d), information_matrix(link, b, d));
    EXPECT_THROW(estimate_J_hat(Link::Logistic, vec({0, 0}), d), DimensionError);
}

TEST(JHatKHat, InterceptOnlyPlugIn) {
    const int n = 40, k = 13;
    Vector z = Vector::Zero(n);
    z.head(k).setOnes();
    const Dataset d(Matrix::Ones(n, 1), z);
    const double p = double(k) / n;
    const Vector b = vec({std::log(p / (1 - p))});
    EXPECT_NEAR(estimate_J_hat(Link::Logistic, b, d)(0, 0), p * (1 - p), 1e-15);
    EXPECT_NEAR(estimate_K_hat(Link::Logistic, b, d)(0, 0), p * (1 - p), 1e-15);
}

TEST(KHat, ConstantResidualMagnitudeFactors) {
    // At beta = 0 every logistic residual is +/- 1/2.
    const Dataset d = random_dataset(32, 200, vec({0.0, 1.0}));
    const Matrix xx = d.covariates().transpose() * d.covariates() / static_cast<double>(d.size());
    EXPECT_LT(max_abs(estimate_K_hat(Link::Logistic, vec({0, 0}), d) - 0.25 * xx), 1e-14);
}

TEST(KHat, MatchesOuterProductOfScores) {
    const Dataset d = random_dataset(33, 100, vec({0.3, -0.2}), Link::Probit);
    const Vector b = vec({0.25, -0.1});
    for (Link link : {Link::Logistic, Link::Probit}) {
        Matrix expected = Matrix::Zero(2, 2);
        for (Eigen::Index i = 0; i < d.size(); ++i) {
            const Vector xi = d.x(i).values();
            const double s = case_slope(link, xi.dot(b), d.z(i));
            expected += s * s * xi * xi.transpose();
        }
        expected /= static_cast<double>(d.size());
        EXPECT_LT(max_abs(estimate_K_hat(link, b, d) - expected), 1e-14);
    }
}

TEST(KHat, WellSpecifiedCloseToJHat) {
    const Dataset d = draw(uniform(-2, 2), logistic_truth(vec({0.5, -1.0})), 100000, 34);
    const FitResult f = fit_mle(Link::Logistic, d);
    ASSERT_TRUE(f.converged);
    const Matrix J = estimate_J_hat(Link::Logistic, f.beta_hat, d);
    const Matrix K = estimate_K_hat(Link::Logistic, f.beta_hat, d);
    EXPECT_LE(max_abs(J - K), 0.02);

    const CovarianceReport r = covariance_report(Link::Logistic, f, d);
    for (Eigen::Index i = 0; i < 2; ++i)
        for (Eigen::Index j = 0; j < 2; ++j)
            EXPECT_LE(std::abs(r.sandwich_cov(i, j) - r.naive_cov(i, j)), 0.15 * std::abs(r.naive_cov(i, j)));
}

TEST(CovarianceReport, InvariantsAndReduction) {
    const Dataset d = random_dataset(35, 1000, vec({0.2, 0.5, -0.8}));
    const FitResult f = fit_mle(Link::Logistic, d);
    const CovarianceReport r = covariance_report(Link::Logistic, f, d);
    EXPECT_EQ(r.n, d.size());
    for (const Matrix* m : {&r.J_hat, &r.K_hat, &r.naive_cov, &r.sandwich_cov}) EXPECT_LE(rel_asym(*m), 1e-12);
    EXPECT_GE(Eigen::SelfAdjointEigenSolver<Matrix>(r.naive_cov).eigenvalues().minCoeff(), 0.0);
    EXPECT_GE(Eigen::SelfAdjointEigenSolver<Matrix>(r.sandwich_cov).eigenvalues().minCoeff(), 0.0);
    EXPECT_LT(max_abs(r.naive_cov - SpdFactor(r.J_hat).inverse() / static_cast<double>(d.size())), 1e-15);

    const CovarianceReport same = covariance_report(r.J_hat, r.J_hat, d.size());
    EXPECT_LE(max_abs(same.sandwich_cov - same.naive_cov) / max_abs(same.naive_cov), 1e-12);
}

TEST(CovarianceReport, SingularCases) {
    const Dataset one = validate_dataset({{0.5, 1}});
    FitResult fake;
    fake.beta_hat = vec({0, 0});
    fake.converged = true;
    fake.status = FitStatus::Converged;
    EXPECT_THROW(covariance_report(Link::Logistic, fake, one), SingularMatrixError);
    FitResult unconverged = fake;
    unconverged.converged = false;
    EXPECT_THROW(covariance_report(Link::Logistic, unconverged, random_dataset(1, 50, vec({0, 0}))), FitError);
}

TEST(CovarianceReport, DuplicatingTheDataHalvesBothCovariances) {
    const Dataset d = random_dataset(36, 400, vec({-0.3, 0.9}));
    Matrix x(2 * d.size(), d.dim());
    x << d.covariates(), d.covariates();
    Vector z(2 * d.size());
    z << d.outcomes(), d.outcomes();
    const Dataset dd(x, z);
    const CovarianceReport a = covariance_report(Link::Logistic, fit_mle(Link::Logistic, d), d);
    const CovarianceReport b = covariance_report(Link::Logistic, fit_mle(Link::Logistic, dd), dd);
    EXPECT_LT(max_abs(b.naive_cov - 0.5 * a.naive_cov) / max_abs(a.naive_cov), 1e-9);
    EXPECT_LT(max_abs(b.sandwich_cov - 0.5 * a.sandwich_cov) / max_abs(a.sandwich_cov), 1e-9);
}

TEST(WaldInterval, Examples) {
    CovarianceReport r;
    r.naive_cov = Matrix::Identity(2, 2) * 0.04;
    r.sandwich_cov = Matrix::Identity(2, 2) * 0.01;
    r.J_hat = r.K_hat = Matrix::Identity(2, 2);
    r.n = 100;
    const Vector b = vec({0.0, 1.0});
    const auto [lo, hi] = wald_interval(r, b, 1, 0.95, WaldFlavor::Sandwich);
    EXPECT_NEAR(lo, 1 - 1.959964 * 0.1, 1e-6);
    EXPECT_NEAR(hi, 1 + 1.959964 * 0.1, 1e-6);
    const auto [nlo, nhi] = wald_interval(r, b, 1, 0.95, WaldFlavor::Naive);
    EXPECT_NEAR(nhi - nlo, 2 * 1.959964 * 0.2, 1e-6);
    const auto [plo, phi] = wald_interval(r, b, 1, 1e-12, WaldFlavor::Sandwich);
    EXPECT_NEAR(plo, 1.0, 1e-12);
    EXPECT_NEAR(phi, 1.0, 1e-12);
    EXPECT_THROW(wald_interval(r, b, 2, 0.95, WaldFlavor::Naive), DimensionError);
    EXPECT_THROW(wald_interval(r, b, 0, 1.0, WaldFlavor::Naive), std::invalid_argument);
}

TEST(WaldInterval, S1WidthFollowsOracleSign) {
    const LeastFalseResult o = least_false(Link::Logistic, s1_covariates(), s1_truth());
    const Dataset d = draw(s1_covariates(), s1_truth(), 4000, 37);
    const FitResult f = fit_mle(Link::Logistic, d);
    const CovarianceReport r = covariance_report(Link::Logistic, f, d);
    for (Eigen::Index u = 0; u < 2; ++u) {
        const auto [nl, nh] = wald_interval(r, f.beta_hat, u, 0.95, WaldFlavor::Naive);
        const auto [sl, sh] = wald_interval(r, f.beta_hat, u, 0.95, WaldFlavor::Sandwich);
        const double sign = o.population_sandwich(u, u) - o.population_naive(u, u);
        EXPECT_GT((sh - sl - (nh - nl)) * sign, 0.0) << u;
    }
}

TEST(MisspecificationStatistic, Definition) {
    Matrix J(2, 2), K(2, 2);
    J << 1, 0.5, 0.5, 2;
    K << 1.5, 0.25, 0.25, 1;
    // vech difference = (-0.5, 0.25, 1)
    EXPECT_NEAR(misspecification_statistic(J, K, 10), 10 * (0.25 + 0.0625 + 1), 1e-14);
    EXPECT_EQ(misspecification_statistic(J, J, 10), 0.0);
}

TEST(MisspecificationTest, DeterministicAndBounded) {
    const Dataset d = random_dataset(38, 300, vec({0.2, -0.6}));
    const FitResult f = fit_mle(Link::Logistic, d);
    const GofReport a = misspecification_test(Link::Logistic, f, d, 200, 77);
    const GofReport b = misspecification_test(Link::Logistic, f, d, 200, 77);
    EXPECT_EQ(a.statistic, b.statistic);
    EXPECT_EQ(a.p_value, b.p_value);
    EXPECT_GE(a.statistic, 0.0);
    EXPECT_GT(a.p_value, 0.0);
    EXPECT_LE(a.p_value, 1.0);
    EXPECT_EQ(a.bootstrap_replicates, 200u);
    EXPECT_EQ(a.seed, 77u);
    // p = (1 + #{T* >= T}) / (1 + B) lies on that lattice.
    const double count = a.p_value * 201.0 - 1.0;
    EXPECT_NEAR(count, std::round(count), 1e-9);
    EXPECT_THROW(misspecification_test(Link::Logistic, f, d, 199, 77), std::invalid_argument);
}

TEST(MisspecificationTest, RejectsS1) {
    const Dataset d = draw(s1_covariates(), s1_truth(), 4000, 39);
    const FitResult f = fit_mle(Link::Logistic, d);
    EXPECT_LT(misspecification_test(Link::Logistic, f, d, 200, 5).p_value, 0.05);
}
