#include "misfit/sandwich.hpp"

#include "misfit/linalg.hpp"
#include "misfit/parallel.hpp"
#include "misfit/random.hpp"
#include "misfit/summation.hpp"

#include <cmath>

namespace misfit {

Matrix estimate_J_hat(Link link, const ParamVector& beta_hat, const Dataset& data) {
    return information_matrix(link, beta_hat, data);
}

Matrix estimate_K_hat(Link link, const ParamVector& beta_hat, const Dataset& data) {
    const Eigen::Index p = data.dim();
    if (beta_hat.size() != p) throw DimensionError("beta_hat and data differ in dimension");
    const Matrix& x = data.covariates();
    const Vector& w = data.case_weights();

    auto leaf = [&](std::size_t begin, std::size_t end) {
        Matrix acc = Matrix::Zero(p, p);
        for (std::size_t k = begin; k < end; ++k) {
            const auto i = static_cast<Eigen::Index>(k);
            if (w[i] == 0.0) continue;
            const auto row = x.row(i);
            const double s = w[i] * case_slope(link, row.dot(beta_hat), data.z(i));
            acc.selfadjointView<Eigen::Lower>().rankUpdate(row.transpose(), s * s);
        }
        return acc;
    };
    const Matrix lower = pairwise_sum<Matrix>(0, static_cast<std::size_t>(data.size()), leaf);
    return Matrix(lower.selfadjointView<Eigen::Lower>()) / static_cast<double>(data.size());
}

CovarianceReport covariance_report(const Matrix& J, const Matrix& K, Eigen::Index n) {
    if (n <= 0) throw std::invalid_argument("sample size must be positive");
    const SpdFactor factor(J);
    const Matrix j_inv = factor.inverse();
    CovarianceReport out;
    out.J_hat = J;
    out.K_hat = K;
    out.n = n;
    out.naive_cov = j_inv / static_cast<double>(n);
    out.sandwich_cov = symmetrize(j_inv * K * j_inv) / static_cast<double>(n);
    return out;
}

CovarianceReport covariance_report(Link link, const FitResult& fit, const Dataset& data) {
    if (!fit.converged) throw FitError("covariance report requires a converged fit");
    return covariance_report(estimate_J_hat(link, fit.beta_hat, data), estimate_K_hat(link, fit.beta_hat, data),
                             data.size());
}

std::string_view to_string(WaldFlavor flavor) { return flavor == WaldFlavor::Naive ? "naive" : "sandwich"; }

std::pair<double, double> wald_interval(const CovarianceReport& report, const ParamVector& beta_hat,
                                        Eigen::Index coordinate, double level, WaldFlavor flavor) {
    if (coordinate < 0 || coordinate >= beta_hat.size()) throw DimensionError("coordinate out of range");
    if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("level must lie in (0, 1)");
    const Matrix& cov = flavor == WaldFlavor::Naive ? report.naive_cov : report.sandwich_cov;
    const double half = normal_quantile(0.5 * (1.0 + level)) * std::sqrt(cov(coordinate, coordinate));
    return {beta_hat[coordinate] - half, beta_hat[coordinate] + half};
}

double misspecification_statistic(const Matrix& J, const Matrix& K, Eigen::Index n) {
    return static_cast<double>(n) * vech(J - K).squaredNorm();
}

GofReport misspecification_test(Link link, const FitResult& fit, const Dataset& data,
                                std::size_t bootstrap_replicates, std::uint64_t seed) {
    if (!fit.converged) throw FitError("misspecification test requires a converged fit");
    if (bootstrap_replicates < kMinBootstrapReplicates)
        throw std::invalid_argument("misspecification test needs at least 200 bootstrap replicates");

    const Eigen::Index n = data.size();
    GofReport out;
    out.seed = seed;
    out.statistic = misspecification_statistic(estimate_J_hat(link, fit.beta_hat, data),
                                               estimate_K_hat(link, fit.beta_hat, data), n);

    Vector fitted(n);
    for (Eigen::Index i = 0; i < n; ++i) fitted[i] = link_mean(link, data.covariates().row(i).dot(fit.beta_hat));

    // NaN marks a dropped replicate.
    std::vector<double> replicate_stats(bootstrap_replicates);
    const CounterRng root(seed);
    FitConfig refit;
    refit.initial_beta = fit.beta_hat;
    parallel_for(bootstrap_replicates, [&](std::size_t r) {
        CounterRng rng = root.substream(r);
        Vector z(n);
        for (Eigen::Index i = 0; i < n; ++i) z[i] = rng.uniform() < fitted[i] ? 1.0 : 0.0;
        const Dataset star(data.covariates(), std::move(z),
                           data.weighted() ? std::optional<Vector>(data.case_weights()) : std::nullopt);
        const FitResult f = fit_mle(link, star, refit);
        if (!f.converged) {
            replicate_stats[r] = std::numeric_limits<double>::quiet_NaN();
            return;
        }
        replicate_stats[r] = misspecification_statistic(estimate_J_hat(link, f.beta_hat, star),
                                                        estimate_K_hat(link, f.beta_hat, star), n);
    });

    std::size_t exceed = 0;
    for (double t : replicate_stats) {
        if (std::isnan(t)) {
            ++out.dropped_replicates;
        } else if (t >= out.statistic) {
            ++exceed;
        }
    }
    out.bootstrap_replicates = bootstrap_replicates - out.dropped_replicates;
    if (static_cast<double>(out.dropped_replicates) > kMaxDroppedFraction * static_cast<double>(bootstrap_replicates))
        throw BootstrapError("too many bootstrap refits failed: " + std::to_string(out.dropped_replicates) + " of " +
                             std::to_string(bootstrap_replicates));
    out.p_value = static_cast<double>(1 + exceed) / static_cast<double>(1 + out.bootstrap_replicates);
    return out;
}

}  // namespace misfit
