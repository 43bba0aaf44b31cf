#pragma once

#include "misfit/random.hpp"
#include "misfit/types.hpp"

#include <functional>
#include <string>
#include <variant>
#include <vector>

namespace misfit {

// ---- Covariate distributions H(dx) ----------------------------------------
// All distributions live on the d raw features; the intercept is added by
// the consumer.

struct ProductUniform {
    Vector lower;
    Vector upper;
};

struct ProductGaussian {
    Vector mean;
    Vector sd;
};

struct ProductBeta {
    Vector a;
    Vector b;
};

using ProductFamily = std::variant<ProductUniform, ProductGaussian, ProductBeta>;

struct FiniteSupport {
    std::vector<Vector> points;
    std::vector<double> probabilities;
};

/// h(x) = pi0 f0(x) + pi1 f1(x); f0 is the law of x given z = 0.
struct TwoClassMixture {
    double pi0 = 0.5;
    double pi1 = 0.5;
    ProductFamily f0;
    ProductFamily f1;
};

Eigen::Index dimension(const ProductFamily& family);
void validate(const ProductFamily& family);
Vector sample(const ProductFamily& family, CounterRng& rng);
double log_density(const ProductFamily& family, const Vector& x);
/// Inverse marginal CDF of coordinate k at u in (0, 1).
double marginal_quantile(const ProductFamily& family, Eigen::Index k, double u);

class CovariateDistribution {
public:
    using Kind = std::variant<FiniteSupport, ProductUniform, ProductGaussian, ProductBeta, TwoClassMixture>;

    /// Validates: probabilities sum to 1, sd > 0, shapes > 0, bounds ordered.
    explicit CovariateDistribution(Kind kind);

    const Kind& kind() const noexcept { return kind_; }
    Eigen::Index dimension() const noexcept { return dim_; }
    bool finite_support() const noexcept { return std::holds_alternative<FiniteSupport>(kind_); }

    /// One draw of the d features.
    Vector sample(CounterRng& rng) const;
    std::string describe() const;

private:
    Kind kind_;
    Eigen::Index dim_ = 0;
};

// ---- True conditional probability q(x) -------------------------------------

enum class FeatureMap {
    Identity,
    /// (x_1, ..., x_d) -> (log x_1, log(1 - x_1), ..., log x_d, log(1 - x_d)).
    BetaLog,
};

Vector apply_feature_map(FeatureMap map, const Vector& x);

struct LogisticInFeatures {
    /// Coefficients on (1, phi(x)).
    Vector beta;
    FeatureMap features = FeatureMap::Identity;
};

/// q(x) = values[k] where k counts the thresholds t with x_feature >= t.
struct StepFunction {
    Eigen::Index feature = 0;
    std::vector<double> thresholds;
    std::vector<double> values;
};

/// Logistic within each interval of x_feature, with its own beta per piece.
struct PiecewiseLogistic {
    Eigen::Index feature = 0;
    std::vector<double> thresholds;
    std::vector<Vector> betas;
};

/// q(x) = pi1 f1(x) / {pi0 f0(x) + pi1 f1(x)}.
struct MixtureRatio {
    TwoClassMixture mixture;
};

/// One-dimensional table, linearly interpolated and held constant outside.
struct Tabulated {
    std::vector<double> x;
    std::vector<double> q;
};

/// Arbitrary q; `breakpoints[k]` lists known discontinuities along feature k.
struct CallableTruth {
    std::function<double(const Vector&)> q;
    std::vector<std::vector<double>> breakpoints;
};

class TrueModel {
public:
    using Kind = std::variant<LogisticInFeatures, StepFunction, PiecewiseLogistic, MixtureRatio, Tabulated, CallableTruth>;

    explicit TrueModel(Kind kind);

    const Kind& kind() const noexcept { return kind_; }
    /// q(x) at the d raw features; always in [0, 1].
    double probability(const Vector& features) const;
    /// Discontinuities along feature k, used to split quadrature panels.
    std::vector<double> breakpoints(Eigen::Index feature) const;
    /// Checks that the model is usable with d features.
    void check_dimension(Eigen::Index d) const;
    std::string describe() const;

private:
    Kind kind_;
};

}  // namespace misfit
