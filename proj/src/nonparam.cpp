#include "misfit/nonparam.hpp"

#include "misfit/parallel.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace misfit {

DensityEstimate::DensityEstimate(Matrix points, KernelKind kernel, Vector bandwidth)
    : points_(std::move(points)), kernel_(kernel), bandwidth_(std::move(bandwidth)) {
    if (kernel_ == KernelKind::Uniform) throw DataError("density estimates use the gaussian or epanechnikov kernel");
    if (points_.rows() < 1) throw DataError("a density estimate needs at least one point");
    if (points_.cols() < 1) throw DimensionError("density estimate needs at least one feature");
    if (!points_.allFinite()) throw DataError("non-finite covariate");
    KernelSpec{kernel_, bandwidth_}.validate(points_.cols());
}

double DensityEstimate::evaluate(const Vector& x) const {
    if (kernel_ == KernelKind::Gaussian) return std::exp(log_evaluate(x));
    if (x.size() != dimension()) throw DimensionError("point and density estimate differ in dimension");
    double sum = 0.0;
    for (Eigen::Index j = 0; j < size(); ++j) {
        double prod = 1.0;
        for (Eigen::Index k = 0; k < dimension() && prod > 0.0; ++k)
            prod *= kernel_density(kernel_, (x[k] - points_(j, k)) / bandwidth_[k]) / bandwidth_[k];
        sum += prod;
    }
    return sum / static_cast<double>(size());
}

double DensityEstimate::log_evaluate(const Vector& x) const {
    if (x.size() != dimension()) throw DimensionError("point and density estimate differ in dimension");
    if (kernel_ != KernelKind::Gaussian) {
        const double f = evaluate(x);
        return f > 0.0 ? std::log(f) : -std::numeric_limits<double>::infinity();
    }
    Vector exponents(size());
    for (Eigen::Index j = 0; j < size(); ++j) {
        double e = 0.0;
        for (Eigen::Index k = 0; k < dimension(); ++k) {
            const double u = (x[k] - points_(j, k)) / bandwidth_[k];
            e -= 0.5 * u * u;
        }
        exponents[j] = e;
    }
    const double top = exponents.maxCoeff();
    const double lse = top + std::log((exponents.array() - top).exp().sum());
    const double d = static_cast<double>(dimension());
    return lse - std::log(static_cast<double>(size())) - bandwidth_.array().log().sum() -
           0.5 * d * std::log(2.0 * std::numbers::pi);
}

Vector normal_reference_bandwidth(const Matrix& points) {
    const auto m = static_cast<double>(points.rows());
    if (points.rows() < 2) throw DataError("a density estimate needs at least 2 points per class");
    Vector h(points.cols());
    for (Eigen::Index k = 0; k < points.cols(); ++k) {
        const double mean = points.col(k).mean();
        const double var = (points.col(k).array() - mean).square().sum() / (m - 1.0);
        if (!(var > 0.0)) throw DataError("normal-reference bandwidth needs non-constant covariates");
        h[k] = 1.06 * std::sqrt(var) * std::pow(m, -0.2);
    }
    return h;
}

ClassPriors estimate_priors(const Dataset& data) {
    const double ones = data.outcomes().sum();
    const auto n = static_cast<double>(data.size());
    if (ones == 0.0 || ones == n) throw DataError("both outcome classes must be present");
    return {1.0 - ones / n, ones / n};
}

DensityRatioValue density_ratio_probability(const DensityEstimate& f0, const DensityEstimate& f1,
                                            const ClassPriors& priors, const Vector& x) {
    if (!(priors.pi0 > 0.0 && priors.pi1 > 0.0) || std::abs(priors.pi0 + priors.pi1 - 1.0) > 1e-12)
        throw DataError("class priors must be positive and sum to 1");
    const double l0 = std::log(priors.pi0) + f0.log_evaluate(x);
    const double l1 = std::log(priors.pi1) + f1.log_evaluate(x);
    constexpr double ninf = -std::numeric_limits<double>::infinity();
    if (l0 == ninf && l1 == ninf) return {priors.pi1, true};
    // pi1 f1 / (pi0 f0 + pi1 f1) as a logistic function of the log ratio.
    return {link_mean(Link::Logistic, l1 - l0), false};
}

namespace {

std::pair<Matrix, Matrix> split_classes(const Dataset& data) {
    const Eigen::Index d = data.dim() - 1;
    if (d < 1) throw DimensionError("density ratio needs at least one covariate");
    const auto ones = static_cast<Eigen::Index>(data.outcomes().sum());
    Matrix c0(data.size() - ones, d), c1(ones, d);
    Eigen::Index i0 = 0, i1 = 0;
    for (Eigen::Index i = 0; i < data.size(); ++i) {
        if (data.z(i))
            c1.row(i1++) = data.covariates().row(i).tail(d);
        else
            c0.row(i0++) = data.covariates().row(i).tail(d);
    }
    if (c0.rows() < 2 || c1.rows() < 2) throw DataError("density ratio needs at least 2 points per class");
    return {std::move(c0), std::move(c1)};
}

}  // namespace

DensityRatioClassifier::DensityRatioClassifier(const Dataset& data, KernelKind kernel, std::optional<Vector> bandwidth0,
                                               std::optional<Vector> bandwidth1)
    : DensityRatioClassifier(split_classes(data), estimate_priors(data), kernel, std::move(bandwidth0),
                             std::move(bandwidth1)) {}

DensityRatioClassifier::DensityRatioClassifier(std::pair<Matrix, Matrix> split, ClassPriors priors, KernelKind kernel,
                                               std::optional<Vector> bandwidth0, std::optional<Vector> bandwidth1)
    : priors_(priors),
      f0_(split.first, kernel, bandwidth0 ? *bandwidth0 : normal_reference_bandwidth(split.first)),
      f1_(split.second, kernel, bandwidth1 ? *bandwidth1 : normal_reference_bandwidth(split.second)) {}

std::vector<DensityRatioValue> DensityRatioClassifier::probabilities(const std::vector<Vector>& grid) const {
    std::vector<DensityRatioValue> out(grid.size());
    parallel_for(grid.size(), [&](std::size_t i) { out[i] = probability(grid[i]); });
    return out;
}

}  // namespace misfit
