#pragma once

#include "misfit/kernels.hpp"
#include "misfit/likelihood.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace misfit {

struct FitConfig {
    int max_iterations = 100;
    /// Max-norm of the score at which a fit counts as converged.
    double gradient_tolerance = 1e-9;
    int step_halving_limit = 30;
    /// Defaults to the zero vector (q = 1/2 everywhere).
    std::optional<ParamVector> initial_beta;

    void validate() const;
};

enum class FitStatus { Converged, SeparationSuspected, SingularInformation, IterationLimit };

std::string_view to_string(FitStatus status);

struct FitResult {
    ParamVector beta_hat;
    bool converged = false;
    int iterations = 0;
    double final_score_norm = 0.0;
    double log_likelihood_at_optimum = 0.0;
    FitStatus status = FitStatus::IterationLimit;
    /// Objective value after each accepted step, starting with the initial point.
    /// Non-decreasing up to the objective's own rounding error (8 ulp).
    std::vector<double> objective_trace;
};

/// |beta|_inf beyond which an unconverged fit is reported as separated.
inline constexpr double kSeparationBetaBound = 1e3;

/// Newton's method with step halving on a weighted design. Shared by sample
/// fits and the population least-false solver.
FitResult fit_design(Link link, const DesignView& design, const FitConfig& config = {});

/// Maximum (weighted) likelihood estimate. Dataset weights turn this into the
/// maximum weighted likelihood estimator without a separate code path.
FitResult fit_mle(Link link, const Dataset& data, const FitConfig& config = {});

/// Kernel-local likelihood at x0: case weights K((x0 - x_i)/h) with the
/// peak-1 kernel profile, then fit_mle. Throws LocalMassError when
/// sum_i K < d + 2.
FitResult fit_local(Link link, const Dataset& data, const CovariateVector& x0, const KernelSpec& spec,
                    const FitConfig& config = {});

struct LocalCurvePoint {
    CovariateVector x;
    /// q*(x) = F(beta_hat(x)^t x); NaN when the local fit failed.
    double probability;
    std::optional<FitResult> fit;
    /// Empty on success; otherwise the reason this point failed.
    std::string error;

    bool ok() const noexcept { return error.empty(); }
};

/// Fits beta_hat(x) at every grid point and evaluates the mean response at
/// that point only. Failures are recorded per point.
std::vector<LocalCurvePoint> local_probability_curve(Link link, const Dataset& data,
                                                     const std::vector<CovariateVector>& grid,
                                                     const KernelSpec& spec, const FitConfig& config = {});

/// Independent Gaussian prior N(mean_k, sd_k^2) on each coefficient.
struct PriorSpec {
    Vector mean;
    Vector sd;
};

struct BayesEstimate {
    ParamVector posterior_mean;
    double effective_sample_size = 0.0;
    std::size_t draws = 0;
    ParamVector mle;
};

inline constexpr std::size_t kMaxBayesDimension = 6;
inline constexpr double kMinImportanceEss = 50.0;
inline constexpr double kProposalInflation = 2.0;

/// Posterior mean under `prior` by self-normalized importance sampling with a
/// Gaussian proposal centered at the MLE, covariance 2 * (1/n) J_hat^{-1}.
/// Deterministic for a given seed; draws may be spread across workers.
BayesEstimate fit_bayes_posterior_mean(Link link, const Dataset& data, const PriorSpec& prior, std::size_t draws,
                                       std::uint64_t seed);

}  // namespace misfit
