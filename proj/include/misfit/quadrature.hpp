#pragma once

#include "misfit/distributions.hpp"

#include <functional>
#include <string_view>
#include <vector>

namespace misfit {

enum class IntegrationBackend { ExactSum, GaussLegendre, QuasiMonteCarlo };

std::string_view to_string(IntegrationBackend backend);

/// Nodes (one row of d features each) with weights summing to one, so that
/// sum_k w_k g(node_k) approximates the integral of g against H.
struct QuadratureRule {
    Matrix nodes;
    Vector weights;
};

/// A fine rule for the answer and a coarser rule of the same family; the
/// difference between the two is the reported integration error estimate.
/// For finite support both rules are the exact sum.
struct IntegrationPlan {
    IntegrationBackend backend = IntegrationBackend::ExactSum;
    QuadratureRule fine;
    QuadratureRule coarse;
};

inline constexpr int kGaussNodes = 64;
inline constexpr int kGaussCoarseNodes = 48;
inline constexpr Eigen::Index kMaxTensorDimension = 3;
inline constexpr int kQmcLog2Points = 16;
/// Gaussian marginals are integrated over mean +/- 10 sd.
inline constexpr double kGaussianHalfWidth = 10.0;

using BreakpointFn = std::function<std::vector<double>(Eigen::Index)>;

/// Rule for H. Continuous marginals are split into panels at the supplied
/// breakpoints so discontinuous integrands (step truths, indicator weights)
/// keep the Gauss-Legendre convergence rate.
IntegrationPlan make_integration_plan(const CovariateDistribution& H, const BreakpointFn& breakpoints = {});

/// Exact rule for a finite-support distribution.
QuadratureRule finite_support_rule(const FiniteSupport& support);

/// Point set of the first `count` Halton points in `dim` dimensions (bases
/// are the first primes), starting at index 1.
Matrix halton_points(Eigen::Index count, Eigen::Index dim);

}  // namespace misfit
