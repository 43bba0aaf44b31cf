#pragma once

#include "misfit/types.hpp"

#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

namespace misfit {

/// Covariate vector x = (1, x_1, ..., x_d) with the intercept slot fixed to 1.
class CovariateVector {
public:
    /// Accepts a full vector whose leading entry must be exactly 1.
    explicit CovariateVector(Vector values);

    /// Prepends the intercept to the d raw features.
    static CovariateVector from_features(std::span<const double> features);
    static CovariateVector from_features(const Vector& features);

    const Vector& values() const noexcept { return values_; }
    Eigen::Index size() const noexcept { return values_.size(); }
    double operator[](Eigen::Index i) const { return values_[i]; }
    /// The d features without the intercept.
    Vector features() const { return values_.tail(values_.size() - 1); }

private:
    Vector values_;
};

/// A weighted design: rows x_i (with intercept), responses y_i in [0, 1] and
/// nonnegative weights w_i. Objectives take the form sum_i w_i * l(y_i, beta^t x_i).
///
/// A Dataset views as y = z and w = case_weight / n, which gives the
/// normalized (1/n) log L. A quadrature rule views as y = q(node) and
/// w = node weight, which gives the population objective. Both problems
/// therefore share one evaluation and one Newton solver.
struct DesignView {
    const Matrix& x;
    const Vector& y;
    const Vector& w;
};

struct Observation {
    CovariateVector x;
    int z;
};

/// n observations sharing one dimension, with optional per-case weights.
/// Immutable after construction.
class Dataset {
public:
    /// `covariates` is n x (d+1) and must carry the intercept column.
    Dataset(Matrix covariates, Vector outcomes, std::optional<Vector> weights = std::nullopt);

    static Dataset from_observations(std::span<const Observation> observations,
                                     std::optional<Vector> weights = std::nullopt);

    Eigen::Index size() const noexcept { return x_.rows(); }
    /// Number of coefficients, d+1.
    Eigen::Index dim() const noexcept { return x_.cols(); }

    const Matrix& covariates() const noexcept { return x_; }
    const Vector& outcomes() const noexcept { return z_; }
    bool weighted() const noexcept { return weights_.has_value(); }
    /// The declared weights, or a vector of ones for an unweighted dataset.
    const Vector& case_weights() const noexcept { return case_weights_; }

    CovariateVector x(Eigen::Index i) const { return CovariateVector(x_.row(i).transpose()); }
    int z(Eigen::Index i) const { return static_cast<int>(z_[i]); }

    /// View with w_i = case_weight_i / n.
    DesignView design() const noexcept { return {x_, z_, design_weights_}; }

    Dataset with_weights(Vector weights) const;
    Dataset without_weights() const;

private:
    Matrix x_;
    Vector z_;
    std::optional<Vector> weights_;
    Vector case_weights_;
    Vector design_weights_;
};

// ---- Link functions --------------------------------------------------------

double normal_pdf(double t);
double normal_cdf(double t);
/// log Phi(t), accurate far into the lower tail.
double log_normal_cdf(double t);
double normal_quantile(double p);
/// phi(t) / Phi(t), finite for every finite t.
double inverse_mills_ratio(double t);

/// Mean function F(t) of the link: logistic sigmoid or Phi.
double link_mean(Link link, double t);
/// log F(t). Both links are symmetric, so log(1 - F(t)) = log_link_mean(-t).
double log_link_mean(Link link, double t);

/// Per-case log-likelihood and its first two derivatives in the linear
/// predictor t, for an outcome y in [0, 1] (fractional y is used by the
/// population routines, where y = q(x)).
struct CaseTerms {
    double log_lik;
    double slope;      // d/dt
    double curvature;  // -d^2/dt^2, nonnegative
};
CaseTerms case_terms(Link link, double t, double y);

/// Score contribution d/dt log f(z | t) for a binary outcome.
double case_slope(Link link, double t, int z);

double linear_predictor(const ParamVector& beta, const CovariateVector& x);
double mean_response(Link link, const ParamVector& beta, const CovariateVector& x);

// ---- Dataset construction -------------------------------------------------

/// Rows of (x_1, ..., x_d, z). Prepends the intercept.
Dataset validate_dataset(const std::vector<std::vector<double>>& rows);

/// Reads the `x1,...,xd,z` CSV format.
Dataset read_csv_dataset(std::istream& in);
Dataset read_csv_dataset(const std::string& path);
void write_csv_dataset(std::ostream& out, const Dataset& data);

}  // namespace misfit
