#include "misfit/oracle.hpp"

#include "misfit/linalg.hpp"
#include "misfit/summation.hpp"

#include <algorithm>
#include <cmath>

namespace misfit {

namespace {

constexpr double kRoundingFloor = 64.0 * std::numeric_limits<double>::epsilon();

// Quadrature rule turned into a weighted design: rows (1, node), responses
// q(node), weights rule_weight * w(node). `weight_values` keeps w(node) on
// its own for K, which needs w^2.
struct PopulationDesign {
    WeightedDesign design;
    Vector rule_weights;
    Vector weight_values;
};

PopulationDesign build_design(const QuadratureRule& rule, const TrueModel& truth, const WeightSpec& weight) {
    const Eigen::Index m = rule.nodes.rows();
    const Eigen::Index d = rule.nodes.cols();
    PopulationDesign out;
    out.design.x.resize(m, d + 1);
    out.design.x.col(0).setOnes();
    out.design.x.rightCols(d) = rule.nodes;
    out.design.y.resize(m);
    out.design.w.resize(m);
    out.weight_values.resize(m);
    out.rule_weights = rule.weights;
    for (Eigen::Index i = 0; i < m; ++i) {
        const Vector node = rule.nodes.row(i).transpose();
        out.design.y[i] = truth.probability(node);
        out.weight_values[i] = weight(node);
        if (!(out.weight_values[i] >= 0.0)) throw OracleError("weight function must be nonnegative");
        out.design.w[i] = rule.weights[i] * out.weight_values[i];
    }
    return out;
}

struct PreparedPlan {
    IntegrationBackend backend;
    PopulationDesign fine;
    PopulationDesign coarse;
};

PreparedPlan prepare(const CovariateDistribution& H, const TrueModel& truth, const WeightSpec& weight) {
    truth.check_dimension(H.dimension());
    auto cuts = [&](Eigen::Index k) {
        auto a = truth.breakpoints(k);
        const auto b = weight.breakpoints(k);
        a.insert(a.end(), b.begin(), b.end());
        return a;
    };
    const IntegrationPlan plan = make_integration_plan(H, cuts);
    PreparedPlan out{plan.backend, build_design(plan.fine, truth, weight), {}};
    if (plan.backend != IntegrationBackend::ExactSum) out.coarse = build_design(plan.coarse, truth, weight);
    return out;
}

double estimate(const PreparedPlan& plan, double fine, double coarse) {
    const double floor = kRoundingFloor * std::max(1.0, std::abs(fine));
    if (plan.backend == IntegrationBackend::ExactSum) return floor;
    return std::abs(fine - coarse) + floor;
}

DistanceValue distance_on(Link link, const ParamVector& beta, const PopulationDesign& pd) {
    const auto& design = pd.design;
    if (beta.size() != design.x.cols()) throw DimensionError("beta and covariate dimension differ");
    bool divergent = false;
    auto leaf = [&](std::size_t begin, std::size_t end) {
        double acc = 0.0;
        for (std::size_t k = begin; k < end; ++k) {
            const auto i = static_cast<Eigen::Index>(k);
            if (design.w[i] == 0.0) continue;
            const double q = design.y[i];
            const double t = design.x.row(i).dot(beta);
            // log q_beta and log(1 - q_beta) straight from the predictor.
            const double log_p = log_link_mean(link, t);
            const double log_1mp = log_link_mean(link, -t);
            double dist = 0.0;
            if (q > 0.0) dist += q * (std::log(q) - log_p);
            if (q < 1.0) dist += (1.0 - q) * (std::log1p(-q) - log_1mp);
            // q_beta that rounds to 0 or 1 where q differs counts as divergence,
            // even though the log-space value would still be finite.
            const double p_beta = link_mean(link, t);
            if (std::isinf(dist) || (p_beta == 0.0 && q > 0.0) || (p_beta == 1.0 && q < 1.0)) {
                divergent = true;
                continue;
            }
            acc += design.w[i] * dist;
        }
        return acc;
    };
    DistanceValue out;
    out.value = pairwise_sum<double>(0, static_cast<std::size_t>(design.x.rows()), leaf);
    out.divergent = divergent;
    if (divergent) out.value = std::numeric_limits<double>::infinity();
    // Exact zeros can come out as -1e-18 after cancellation.
    out.value = std::max(out.value, 0.0);
    return out;
}

PopulationMatrices matrices_on(Link link, const ParamVector& beta, const PopulationDesign& pd) {
    const auto& design = pd.design;
    const Eigen::Index p = design.x.cols();
    if (beta.size() != p) throw DimensionError("beta and covariate dimension differ");
    struct Acc {
        Matrix j, k;
        Acc& operator+=(const Acc& o) {
            j += o.j;
            k += o.k;
            return *this;
        }
    };
    auto leaf = [&](std::size_t begin, std::size_t end) {
        Acc acc{Matrix::Zero(p, p), Matrix::Zero(p, p)};
        for (std::size_t s = begin; s < end; ++s) {
            const auto i = static_cast<Eigen::Index>(s);
            if (design.w[i] == 0.0) continue;
            const auto row = design.x.row(i);
            const double t = row.dot(beta);
            const double q = design.y[i];
            const double s1 = case_slope(link, t, 1);
            const double s0 = case_slope(link, t, 0);
            const double wv = pd.weight_values[i];
            acc.j.selfadjointView<Eigen::Lower>().rankUpdate(row.transpose(),
                                                             design.w[i] * case_terms(link, t, q).curvature);
            acc.k.selfadjointView<Eigen::Lower>().rankUpdate(
                row.transpose(), pd.rule_weights[i] * wv * wv * (q * s1 * s1 + (1.0 - q) * s0 * s0));
        }
        return acc;
    };
    const Acc total = pairwise_sum<Acc>(0, static_cast<std::size_t>(design.x.rows()), leaf);
    return {Matrix(total.j.selfadjointView<Eigen::Lower>()), Matrix(total.k.selfadjointView<Eigen::Lower>()), 0.0};
}

}  // namespace

IntegratedValue population_objective(Link link, const ParamVector& beta, const CovariateDistribution& H,
                                     const TrueModel& truth, const WeightSpec& weight) {
    const PreparedPlan plan = prepare(H, truth, weight);
    const double fine = evaluate(link, beta, plan.fine.design.view(), EvalParts::Value).value;
    const double coarse = plan.backend == IntegrationBackend::ExactSum
                              ? fine
                              : evaluate(link, beta, plan.coarse.design.view(), EvalParts::Value).value;
    return {fine, estimate(plan, fine, coarse)};
}

IntegratedValue population_score_norm(Link link, const ParamVector& beta, const CovariateDistribution& H,
                                      const TrueModel& truth, const WeightSpec& weight) {
    const PreparedPlan plan = prepare(H, truth, weight);
    const Vector fine = evaluate(link, beta, plan.fine.design.view(), EvalParts::ValueScore).score;
    double err = kRoundingFloor;
    if (plan.backend != IntegrationBackend::ExactSum) {
        const Vector coarse = evaluate(link, beta, plan.coarse.design.view(), EvalParts::ValueScore).score;
        err += (fine - coarse).lpNorm<Eigen::Infinity>();
    }
    return {fine.lpNorm<Eigen::Infinity>(), err};
}

double bernoulli_kl(double q, double p) {
    if (!(q >= 0.0 && q <= 1.0 && p >= 0.0 && p <= 1.0)) throw std::domain_error("probabilities must lie in [0, 1]");
    double d = 0.0;
    if (q > 0.0) d += q * std::log(q / p);
    if (q < 1.0) d += (1.0 - q) * std::log((1.0 - q) / (1.0 - p));
    return d;
}

DistanceValue delta_distance(Link link, const ParamVector& beta, const CovariateDistribution& H,
                             const TrueModel& truth, const WeightSpec& weight) {
    const PreparedPlan plan = prepare(H, truth, weight);
    DistanceValue fine = distance_on(link, beta, plan.fine);
    if (fine.divergent) return fine;
    const double coarse =
        plan.backend == IntegrationBackend::ExactSum ? fine.value : distance_on(link, beta, plan.coarse).value;
    fine.error_estimate = estimate(plan, fine.value, coarse);
    return fine;
}

PopulationMatrices population_J_K(Link link, const ParamVector& beta, const CovariateDistribution& H,
                                  const TrueModel& truth, const WeightSpec& weight) {
    const PreparedPlan plan = prepare(H, truth, weight);
    PopulationMatrices fine = matrices_on(link, beta, plan.fine);
    double err = kRoundingFloor * std::max({1.0, fine.J.lpNorm<Eigen::Infinity>(), fine.K.lpNorm<Eigen::Infinity>()});
    if (plan.backend != IntegrationBackend::ExactSum) {
        const PopulationMatrices coarse = matrices_on(link, beta, plan.coarse);
        err += std::max((fine.J - coarse.J).lpNorm<Eigen::Infinity>(), (fine.K - coarse.K).lpNorm<Eigen::Infinity>());
    }
    fine.error_estimate = err;
    return fine;
}

namespace {

// Full Newton steps past the tolerance while they keep shrinking the score.
// Convergence is quadratic here, so this reaches rounding level in a step or
// two and keeps beta0 well inside the integration error.
void polish(Link link, const DesignView& design, FitResult& fit) {
    for (int k = 0; k < 4; ++k) {
        const LikelihoodEvaluation at = evaluate(link, fit.beta_hat, design, EvalParts::All);
        ParamVector next;
        try {
            next = fit.beta_hat + SpdFactor(at.neg_hessian).solve(at.score);
        } catch (const SingularMatrixError&) {
            return;
        }
        const double norm = evaluate(link, next, design, EvalParts::ValueScore).score.lpNorm<Eigen::Infinity>();
        if (!(norm < fit.final_score_norm)) return;
        fit.beta_hat = next;
        fit.final_score_norm = norm;
    }
}

}  // namespace

LeastFalseResult least_false(Link link, const CovariateDistribution& H, const TrueModel& truth, double tolerance,
                             const WeightSpec& weight) {
    if (!(tolerance > 0.0)) throw std::invalid_argument("oracle tolerance must be positive");
    const PreparedPlan plan = prepare(H, truth, weight);
    if (plan.fine.design.w.sum() <= 0.0) throw OracleError("weight function vanishes on the support of H");

    FitConfig config;
    config.gradient_tolerance = tolerance;
    auto solve = [&](const PopulationDesign& pd) {
        FitResult fit = fit_design(link, pd.design.view(), config);
        switch (fit.status) {
            case FitStatus::Converged: polish(link, pd.design.view(), fit); return fit;
            case FitStatus::SeparationSuspected:
                throw OracleDivergenceError("least-false parameter diverges: the population objective has no "
                                            "finite maximiser for this truth and covariate distribution");
            default:
                throw OracleError("least-false solver failed: " + std::string(to_string(fit.status)));
        }
    };

    const FitResult fine = solve(plan.fine);
    LeastFalseResult out;
    out.backend = plan.backend;
    out.beta0 = fine.beta_hat;
    out.iterations = fine.iterations;
    out.score_norm = fine.final_score_norm;

    const DistanceValue delta = distance_on(link, out.beta0, plan.fine);
    out.delta_at_beta0 = delta.value;

    const PopulationMatrices jk = matrices_on(link, out.beta0, plan.fine);
    out.population_J = jk.J;
    out.population_K = jk.K;
    try {
        const Matrix j_inv = SpdFactor(jk.J).inverse();
        out.population_naive = j_inv;
        out.population_sandwich = symmetrize(j_inv * jk.K * j_inv);
    } catch (const SingularMatrixError& e) {
        throw OracleError(std::string("population J is singular: ") + e.what());
    }

    if (plan.backend == IntegrationBackend::ExactSum) {
        out.integration_error_estimate = 0.0;
    } else {
        const FitResult coarse = solve(plan.coarse);
        const double delta_coarse = distance_on(link, coarse.beta_hat, plan.coarse).value;
        out.integration_error_estimate =
            std::max((out.beta0 - coarse.beta_hat).lpNorm<Eigen::Infinity>(), std::abs(out.delta_at_beta0 - delta_coarse)) +
            kRoundingFloor;
    }
    return out;
}

// ---- Two-class mixtures -----------------------------------------------------------

MixtureModel mixture_truth(const TwoClassMixture& mixture) {
    return {CovariateDistribution(mixture), TrueModel(MixtureRatio{mixture})};
}

ParamVector gaussian_groupwise_beta(const Vector& mean0, const Vector& mean1, const Matrix& pooled_cov, double pi0,
                                    double pi1) {
    const Eigen::Index d = mean0.size();
    if (d < 1 || mean1.size() != d || pooled_cov.rows() != d || pooled_cov.cols() != d)
        throw DimensionError("class means and pooled covariance differ in dimension");
    if (!(pi0 > 0.0 && pi1 > 0.0)) throw DataError("class priors must be positive");
    const SpdFactor factor(pooled_cov);
    const Vector a0 = factor.solve(mean0);
    const Vector a1 = factor.solve(mean1);
    ParamVector beta(d + 1);
    beta[0] = std::log(pi1 / pi0) - 0.5 * (mean1.dot(a1) - mean0.dot(a0));
    beta.tail(d) = a1 - a0;
    return beta;
}

ParamVector gaussian_log_ratio_coefficients(const TwoClassMixture& mixture) {
    const auto* g0 = std::get_if<ProductGaussian>(&mixture.f0);
    const auto* g1 = std::get_if<ProductGaussian>(&mixture.f1);
    if (!g0 || !g1) throw DataError("gaussian log-ratio needs Gaussian class densities");
    if (g0->sd != g1->sd) throw DataError("gaussian log-ratio is linear only for equal class variances");
    const Matrix cov = g0->sd.array().square().matrix().asDiagonal();
    return gaussian_groupwise_beta(g0->mean, g1->mean, cov, mixture.pi0, mixture.pi1);
}

ParamVector beta_log_ratio_coefficients(const TwoClassMixture& mixture) {
    const auto* b0 = std::get_if<ProductBeta>(&mixture.f0);
    const auto* b1 = std::get_if<ProductBeta>(&mixture.f1);
    if (!b0 || !b1) throw DataError("beta log-ratio needs Beta class densities");
    const Eigen::Index d = b0->a.size();
    if (b1->a.size() != d) throw DimensionError("class densities differ in dimension");
    auto log_beta_fn = [](double a, double b) { return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b); };
    ParamVector beta(1 + 2 * d);
    beta[0] = std::log(mixture.pi1 / mixture.pi0);
    for (Eigen::Index k = 0; k < d; ++k) {
        beta[0] += log_beta_fn(b0->a[k], b0->b[k]) - log_beta_fn(b1->a[k], b1->b[k]);
        beta[1 + 2 * k] = b1->a[k] - b0->a[k];
        beta[2 + 2 * k] = b1->b[k] - b0->b[k];
    }
    return beta;
}

ParamVector gaussian_groupwise_fit(const Dataset& data) {
    const Eigen::Index d = data.dim() - 1;
    if (d < 1) throw DimensionError("group-wise estimation needs at least one covariate");
    Vector sum[2] = {Vector::Zero(d), Vector::Zero(d)};
    Eigen::Index count[2] = {0, 0};
    for (Eigen::Index i = 0; i < data.size(); ++i) {
        const int z = data.z(i);
        sum[z] += data.covariates().row(i).tail(d).transpose();
        ++count[z];
    }
    if (count[0] == 0 || count[1] == 0) throw DataError("empty class");
    const Vector mean0 = sum[0] / static_cast<double>(count[0]);
    const Vector mean1 = sum[1] / static_cast<double>(count[1]);
    Matrix scatter = Matrix::Zero(d, d);
    for (Eigen::Index i = 0; i < data.size(); ++i) {
        const Vector dev = data.covariates().row(i).tail(d).transpose() - (data.z(i) ? mean1 : mean0);
        scatter.selfadjointView<Eigen::Lower>().rankUpdate(dev);
    }
    const Eigen::Index dof = count[0] + count[1] - 2;
    if (dof <= 0) throw SingularMatrixError("pooled covariance needs at least three observations");
    const Matrix pooled = Matrix(scatter.selfadjointView<Eigen::Lower>()) / static_cast<double>(dof);
    const double n = static_cast<double>(data.size());
    return gaussian_groupwise_beta(mean0, mean1, pooled, static_cast<double>(count[0]) / n,
                                   static_cast<double>(count[1]) / n);
}

}  // namespace misfit
