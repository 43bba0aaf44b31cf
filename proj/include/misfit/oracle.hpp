#pragma once

#include "misfit/fit.hpp"
#include "misfit/quadrature.hpp"

namespace misfit {

/// A population integral together with its integration-error estimate.
struct IntegratedValue {
    double value = 0.0;
    double error_estimate = 0.0;
};

struct DistanceValue {
    double value = 0.0;
    double error_estimate = 0.0;
    /// q_beta hits 0 or 1 where q(x) differs: the distance is +infinity.
    bool divergent = false;
};

struct PopulationMatrices {
    Matrix J;
    Matrix K;
    double error_estimate = 0.0;
};

struct LeastFalseResult {
    ParamVector beta0;
    double delta_at_beta0 = 0.0;
    Matrix population_J;
    Matrix population_K;
    /// J^{-1} K J^{-1}, the limit covariance of sqrt(n)(beta_hat - beta0).
    Matrix population_sandwich;
    /// J^{-1}, the limit covariance the model-based theory would claim.
    Matrix population_naive;
    double integration_error_estimate = 0.0;
    /// |int x {q(x) - q_beta0(x)} w(x) H(dx)|_inf on the fine rule.
    double score_norm = 0.0;
    IntegrationBackend backend = IntegrationBackend::ExactSum;
    int iterations = 0;
};

inline constexpr double kDefaultOracleTolerance = 1e-10;

/// int [q(x) log F(beta^t x) + {1 - q(x)} log{1 - F(beta^t x)}] w(x) H(dx);
/// for the logistic link this is int [q beta^t x - log(1 + e^{beta^t x})] w dH.
IntegratedValue population_objective(Link link, const ParamVector& beta, const CovariateDistribution& H,
                                     const TrueModel& truth, const WeightSpec& weight = {});

/// Population score int x {q(x) - q_beta(x)} w(x) H(dx) (logistic), or the
/// probit analogue; returns the max-norm on the fine rule and its estimate.
IntegratedValue population_score_norm(Link link, const ParamVector& beta, const CovariateDistribution& H,
                                      const TrueModel& truth, const WeightSpec& weight = {});

/// Kullback-Leibler distance between Bernoulli(q) and Bernoulli(p), with
/// 0 log 0 = 0. Returns +infinity when p is 0 or 1 and q differs.
double bernoulli_kl(double q, double p);

/// Delta_w(q, q_beta) = int D{q(x), q_beta(x)} w(x) H(dx).
DistanceValue delta_distance(Link link, const ParamVector& beta, const CovariateDistribution& H,
                             const TrueModel& truth, const WeightSpec& weight = {});

/// J(beta) = int x x^t w(x) c_beta(x) H(dx) with c the expected curvature, and
/// K(beta) = int x x^t w(x)^2 [q s1^2 + (1 - q) s0^2] H(dx) with s1, s0 the
/// per-case scores for z = 1 and z = 0.
PopulationMatrices population_J_K(Link link, const ParamVector& beta, const CovariateDistribution& H,
                                  const TrueModel& truth, const WeightSpec& weight = {});

/// Least-false beta0 maximising the (weighted) population objective, by the
/// same Newton solver the sample fits use. Throws OracleDivergenceError when
/// the maximiser escapes to infinity.
LeastFalseResult least_false(Link link, const CovariateDistribution& H, const TrueModel& truth,
                             double tolerance = kDefaultOracleTolerance, const WeightSpec& weight = {});

// ---- Two-class mixtures -----------------------------------------------------------

struct MixtureModel {
    CovariateDistribution H;
    TrueModel truth;
};

/// The conditional probability q(x) = pi1 f1 / (pi0 f0 + pi1 f1) induced by
/// the mixture, paired with the mixture marginal h as the covariate law.
MixtureModel mixture_truth(const TwoClassMixture& mixture);

/// Exact logit coefficients for Gaussian classes sharing per-coordinate sds:
/// slope (mu1 - mu0) / sd^2, intercept log(pi1/pi0) - sum (mu1^2 - mu0^2) / (2 sd^2).
ParamVector gaussian_log_ratio_coefficients(const TwoClassMixture& mixture);

/// Exact logit coefficients for Beta classes on the features
/// (log x_k, log(1 - x_k)): a1 - a0 and b1 - b0 per coordinate.
ParamVector beta_log_ratio_coefficients(const TwoClassMixture& mixture);

/// Plug-in of class means and a pooled covariance into the equal-covariance
/// Gaussian log-ratio.
ParamVector gaussian_groupwise_beta(const Vector& mean0, const Vector& mean1, const Matrix& pooled_cov, double pi0,
                                    double pi1);

/// Group-wise estimate from labelled data: class means, pooled covariance
/// with n0 + n1 - 2 degrees of freedom, priors from class proportions.
ParamVector gaussian_groupwise_fit(const Dataset& data);

}  // namespace misfit
