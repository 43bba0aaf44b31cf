#pragma once

#include "misfit/nonparam.hpp"
#include "misfit/oracle.hpp"
#include "misfit/sandwich.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace misfit {

// ---- Estimators a scenario can run --------------------------------------------------

struct MleEstimator {};
struct WeightedMleEstimator {
    WeightSpec weight;
};
struct LocalEstimator {
    /// Raw features of the query point.
    Vector x0;
    KernelSpec spec;
};
struct BayesEstimator {
    PriorSpec prior;
    std::size_t draws = 4000;
};
struct DensityRatioEstimator {
    KernelKind kernel = KernelKind::Gaussian;
    /// Normal-reference rule per class when absent.
    std::optional<Vector> bandwidth0;
    std::optional<Vector> bandwidth1;
    std::vector<Vector> grid;
};
struct GaussianGroupwiseEstimator {};

using EstimatorKind = std::variant<MleEstimator, WeightedMleEstimator, LocalEstimator, BayesEstimator,
                                   DensityRatioEstimator, GaussianGroupwiseEstimator>;

struct EstimatorSpec {
    std::string name;
    EstimatorKind kind;
};

std::string_view estimator_kind_name(const EstimatorKind& kind);

/// Pass/fail checks a scenario may carry; each yields one verdict line per
/// applicable estimator.
struct ScenarioChecks {
    /// Mean of beta_hat within this many Monte Carlo standard errors of beta0.
    std::optional<double> mean_within_se;
    /// Relative tolerance of n * cov(beta_hat) against the oracle sandwich.
    std::optional<double> covariance_rel_tol;
    std::optional<std::pair<double, double>> sandwich_coverage;
    std::optional<std::pair<double, double>> naive_coverage;
    /// Expect at least one coordinate's naive coverage outside this band.
    std::optional<std::pair<double, double>> naive_coverage_outside;
    /// Density-ratio mean absolute deviation bound.
    std::optional<double> max_mean_abs_deviation;

    bool empty() const {
        return !mean_within_se && !covariance_rel_tol && !sandwich_coverage && !naive_coverage &&
               !naive_coverage_outside && !max_mean_abs_deviation;
    }
};

struct Scenario {
    Scenario(std::string name_, CovariateDistribution H_, TrueModel truth_)
        : name(std::move(name_)), H(std::move(H_)), truth(std::move(truth_)) {}

    std::string name;
    CovariateDistribution H;
    TrueModel truth;
    Link link = Link::Logistic;
    Eigen::Index n = 0;
    std::size_t replications = 1;
    std::uint64_t seed = 0;
    std::vector<EstimatorSpec> estimators;
    std::vector<double> coverage_levels{0.95};
    double oracle_tolerance = kDefaultOracleTolerance;
    FitConfig fit;
    ScenarioChecks checks;

    /// n >= d + 2, replications >= 1, at least one estimator, levels in (0, 1).
    void validate() const;
};

inline constexpr double kFailureBudget = 0.05;
/// Oracle sandwich entries at or below this magnitude are not compared.
inline constexpr double kCovarianceEntryFloor = 0.01;

/// x_i ~ H, then z_i | x_i ~ Bernoulli{q(x_i)}. Case i of replication r uses
/// the stream (seed, r, i), so any replication can be drawn on its own.
Dataset draw_dataset(const Scenario& scenario, std::size_t replication);

/// Per-replication outcome of one estimator.
struct ReplicationRecord {
    std::size_t replication = 0;
    std::string estimator;
    /// beta_hat, or q_hat on the grid for the density-ratio estimator.
    Vector estimate;
    bool converged = false;
    std::string flags;
};

struct CoverageCount {
    double level = 0.95;
    WaldFlavor flavor = WaldFlavor::Sandwich;
    std::vector<std::size_t> covered;
    std::vector<double> rate;
};

struct EstimatorSummary {
    std::string name;
    std::string kind;
    std::size_t successes = 0;
    std::size_t failures = 0;

    /// beta0 the estimator aims at (oracle), or q on the grid.
    std::optional<Vector> target;
    std::optional<LeastFalseResult> oracle;

    Vector mean;
    /// Standard deviation across replications over sqrt(successes).
    Vector mc_standard_error;
    /// n * sample covariance of beta_hat; absent with fewer than two successes.
    std::optional<Matrix> scaled_covariance;
    /// |empirical - oracle| / |oracle| for oracle entries above the floor, NaN elsewhere.
    std::optional<Matrix> covariance_relative_error;
    std::optional<double> max_covariance_relative_error;

    /// Averages of J_hat, K_hat, n * sandwich and n * naive covariance.
    std::optional<Matrix> mean_J_hat;
    std::optional<Matrix> mean_K_hat;
    std::optional<Matrix> mean_scaled_sandwich;
    std::optional<Matrix> mean_scaled_naive;
    std::vector<CoverageCount> coverage;

    /// Density ratio: mean over replications of the grid-average |q_hat - q|.
    std::optional<double> mean_abs_deviation;
    std::size_t prior_fallbacks = 0;
};

struct CheckVerdict {
    std::string check;
    std::string estimator;
    bool passed = false;
    std::string detail;
};

struct ReplicationSummary {
    std::string scenario;
    Eigen::Index n = 0;
    std::size_t replications = 0;
    std::uint64_t seed = 0;
    /// Set when only one replication ran, so no covariance can be estimated.
    bool covariance_undefined = false;
    std::vector<EstimatorSummary> estimators;
    std::vector<ReplicationRecord> records;
    std::vector<CheckVerdict> verdicts;
};

/// Runs every estimator on every replication (replications in parallel,
/// folded in index order). Throws BudgetExceededError when more than 5% of
/// an estimator's replications fail.
ReplicationSummary run_experiment(const Scenario& scenario);

/// Evaluates the scenario's embedded checks against a finished summary.
std::vector<CheckVerdict> evaluate_checks(const Scenario& scenario, const ReplicationSummary& summary);

struct ConvergencePoint {
    Eigen::Index n = 0;
    double mean_deviation = 0.0;
    double covariance_error = 0.0;
};

/// Runs the scenario's first beta estimator at each n. mean_deviation is the
/// mean of |beta_hat - beta0|_inf; covariance_error the largest relative
/// entry error of n * cov(beta_hat) against the oracle sandwich.
std::vector<ConvergencePoint> convergence_curve(const Scenario& scenario, const std::vector<Eigen::Index>& sizes,
                                                std::size_t replications);

}  // namespace misfit
