#pragma once

#include "misfit/kernels.hpp"

#include <optional>
#include <vector>

namespace misfit {

/// Product-kernel density estimate from the raw features of one class.
/// Only the Gaussian and Epanechnikov kernels are accepted.
class DensityEstimate {
public:
    /// `points` is m x d (no intercept column), m >= 1.
    DensityEstimate(Matrix points, KernelKind kernel, Vector bandwidth);

    /// (1/m) sum_j prod_k (1/h_k) K((x_k - X_jk) / h_k).
    double evaluate(const Vector& x) const;
    /// log of evaluate(x); -infinity where the estimate vanishes. The
    /// Gaussian kernel goes through log-sum-exp so far tails stay finite.
    double log_evaluate(const Vector& x) const;

    Eigen::Index size() const noexcept { return points_.rows(); }
    Eigen::Index dimension() const noexcept { return points_.cols(); }
    KernelKind kernel() const noexcept { return kernel_; }
    const Vector& bandwidth() const noexcept { return bandwidth_; }

private:
    Matrix points_;
    KernelKind kernel_;
    Vector bandwidth_;
};

/// h_k = 1.06 sd_k m^{-1/5}, coordinate by coordinate.
Vector normal_reference_bandwidth(const Matrix& points);

struct ClassPriors {
    double pi0 = 0.5;
    double pi1 = 0.5;
};

/// Class proportions; throws DataError unless both outcomes occur.
ClassPriors estimate_priors(const Dataset& data);

struct DensityRatioValue {
    double probability = 0.5;
    /// Both estimates vanish at x and the prior pi1 was returned.
    bool prior_fallback = false;
};

/// q_hat(x) = pi1 f1(x) / {pi0 f0(x) + pi1 f1(x)}.
DensityRatioValue density_ratio_probability(const DensityEstimate& f0, const DensityEstimate& f1,
                                            const ClassPriors& priors, const Vector& x);

/// Splits a dataset by outcome and fits one density per class. Bandwidths
/// default to the normal-reference rule, chosen separately per class. Each
/// class needs at least 2 cases.
class DensityRatioClassifier {
public:
    DensityRatioClassifier(const Dataset& data, KernelKind kernel, std::optional<Vector> bandwidth0 = std::nullopt,
                           std::optional<Vector> bandwidth1 = std::nullopt);

    DensityRatioValue probability(const Vector& features) const {
        return density_ratio_probability(f0_, f1_, priors_, features);
    }
    std::vector<DensityRatioValue> probabilities(const std::vector<Vector>& grid) const;

    const DensityEstimate& class0() const noexcept { return f0_; }
    const DensityEstimate& class1() const noexcept { return f1_; }
    const ClassPriors& priors() const noexcept { return priors_; }

private:
    DensityRatioClassifier(std::pair<Matrix, Matrix> split, ClassPriors priors, KernelKind kernel,
                           std::optional<Vector> bandwidth0, std::optional<Vector> bandwidth1);

    ClassPriors priors_;
    DensityEstimate f0_;
    DensityEstimate f1_;
};

}  // namespace misfit
