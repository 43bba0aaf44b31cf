#pragma once

#include "misfit/fit.hpp"

#include <cstdint>
#include <utility>

namespace misfit {

/// J_hat = J_n(beta_hat), the negative Hessian at the estimate (identical to
/// information_matrix).
Matrix estimate_J_hat(Link link, const ParamVector& beta_hat, const Dataset& data);

/// K_hat = (1/n) sum_i w_i^2 s_i s_i^t with s_i the per-case score; for the
/// unweighted logistic link this is (1/n) sum_i x_i x_i^t (z_i - q_i)^2.
Matrix estimate_K_hat(Link link, const ParamVector& beta_hat, const Dataset& data);

struct CovarianceReport {
    Matrix J_hat;
    Matrix K_hat;
    /// (1/n) J^{-1}: the model-based covariance.
    Matrix naive_cov;
    /// (1/n) J^{-1} K J^{-1}: valid whether or not the model holds.
    Matrix sandwich_cov;
    Eigen::Index n = 0;
};

/// Assembles the report from given J and K; throws SingularMatrixError when
/// J's condition number exceeds 1e12.
CovarianceReport covariance_report(const Matrix& J, const Matrix& K, Eigen::Index n);

/// Requires a converged fit.
CovarianceReport covariance_report(Link link, const FitResult& fit, const Dataset& data);

enum class WaldFlavor { Naive, Sandwich };

std::string_view to_string(WaldFlavor flavor);

/// beta_hat_u -/+ Phi^{-1}((1 + level)/2) sqrt(cov_uu).
std::pair<double, double> wald_interval(const CovarianceReport& report, const ParamVector& beta_hat,
                                        Eigen::Index coordinate, double level, WaldFlavor flavor);

/// T = n |vech(J - K)|^2.
double misspecification_statistic(const Matrix& J, const Matrix& K, Eigen::Index n);

struct GofReport {
    double statistic = 0.0;
    double p_value = 1.0;
    std::size_t bootstrap_replicates = 0;
    std::size_t dropped_replicates = 0;
    std::uint64_t seed = 0;
};

inline constexpr std::size_t kMinBootstrapReplicates = 200;
inline constexpr double kMaxDroppedFraction = 0.10;

/// Parametric-bootstrap test of J = K. Outcomes are resimulated from the
/// fitted model with covariates held fixed; replicate r uses the stream
/// (seed, r), so results do not depend on scheduling. Failed refits are
/// dropped and counted; more than 10% dropped raises BootstrapError.
GofReport misspecification_test(Link link, const FitResult& fit, const Dataset& data,
                                std::size_t bootstrap_replicates, std::uint64_t seed);

}  // namespace misfit
