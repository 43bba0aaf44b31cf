#pragma once

#include "misfit/simulation.hpp"

#include <cmath>
#include <functional>
#include <random>

namespace misfit::testing {

/// H uniform on {-1, 0, 1} (or with the given masses).
inline CovariateDistribution s1_covariates(double m0 = 1.0 / 3, double m1 = 1.0 / 3, double m2 = 1.0 / 3) {
    return CovariateDistribution(FiniteSupport{{Vector::Constant(1, -1.0), Vector::Constant(1, 0.0), Vector::Constant(1, 1.0)},
                                               {m0, m1, m2}});
}

/// q(x) = 0.2 for x < 0 and 0.9 for x >= 0.
inline TrueModel s1_truth() { return TrueModel(StepFunction{0, {0.0}, {0.2, 0.9}}); }

inline Vector vec(std::initializer_list<double> v) {
    Vector out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) out[i++] = x;
    return out;
}

/// Covariates N(0, 1) per coordinate, outcomes from the given link and beta.
inline Dataset random_dataset(std::uint64_t seed, Eigen::Index n, const Vector& beta, Link link = Link::Logistic) {
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> unif;
    const Eigen::Index p = beta.size();
    Matrix x(n, p);
    Vector z(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        x(i, 0) = 1.0;
        for (Eigen::Index k = 1; k < p; ++k) x(i, k) = normal(gen);
        z[i] = unif(gen) < link_mean(link, x.row(i).dot(beta)) ? 1.0 : 0.0;
    }
    return Dataset(std::move(x), std::move(z));
}

/// Dataset of size n from (H, truth) through the simulation stream `rep`.
inline Dataset draw(const CovariateDistribution& H, const TrueModel& truth, Eigen::Index n, std::uint64_t seed,
                    std::size_t rep = 0) {
    Scenario s("draw", H, truth);
    s.n = n;
    s.seed = seed;
    s.estimators.push_back({"mle", MleEstimator{}});
    return draw_dataset(s, rep);
}

inline CovariateDistribution uniform(double lo, double hi) {
    return CovariateDistribution(ProductUniform{Vector::Constant(1, lo), Vector::Constant(1, hi)});
}

inline TrueModel logistic_truth(const Vector& beta) { return TrueModel(LogisticInFeatures{beta}); }

/// Central differences with step h * max(1, |b_k|).
inline Vector fd_gradient(const std::function<double(const Vector&)>& f, const Vector& b, double h = 1e-6) {
    Vector g(b.size());
    for (Eigen::Index k = 0; k < b.size(); ++k) {
        const double step = h * std::max(1.0, std::abs(b[k]));
        Vector up = b, down = b;
        up[k] += step;
        down[k] -= step;
        g[k] = (f(up) - f(down)) / (2.0 * step);
    }
    return g;
}

inline double max_abs(const Matrix& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace misfit::testing
