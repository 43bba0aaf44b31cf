#include "misfit/fit.hpp"

#include "misfit/linalg.hpp"
#include "misfit/parallel.hpp"
#include "misfit/random.hpp"

#include <cmath>
#include <random>

namespace misfit {

namespace {

// Divergence signature: Newton steps that stop contracting while some fitted
// probability is within exp(-20) of 0 or 1. A maximiser at finite beta makes
// Newton contract quadratically; a likelihood whose supremum sits at infinity
// makes the steps approach a constant length instead. Under the probit link
// the steps do shrink, but only like 1/t, long after the score has vanished.
constexpr double kExtremePredictor = 20.0;
constexpr double kContractionRatio = 0.5;
constexpr int kStallLimit = 10;
constexpr double kStepTolerance = 1e-6;

double max_abs_predictor(const DesignView& design, const ParamVector& beta) {
    const Vector eta = design.x * beta;
    double m = 0.0;
    for (Eigen::Index i = 0; i < eta.size(); ++i)
        if (design.w[i] > 0.0) m = std::max(m, std::abs(eta[i]));
    return m;
}

}  // namespace

void FitConfig::validate() const {
    if (max_iterations <= 0) throw std::invalid_argument("max_iterations must be positive");
    if (!(gradient_tolerance > 0.0)) throw std::invalid_argument("gradient_tolerance must be positive");
    if (step_halving_limit <= 0) throw std::invalid_argument("step_halving_limit must be positive");
    if (initial_beta && !initial_beta->allFinite()) throw DataError("initial beta must be finite");
}

std::string_view to_string(FitStatus status) {
    switch (status) {
        case FitStatus::Converged: return "Converged";
        case FitStatus::SeparationSuspected: return "SeparationSuspected";
        case FitStatus::SingularInformation: return "SingularInformation";
        case FitStatus::IterationLimit: return "IterationLimit";
    }
    return "Unknown";
}

FitResult fit_design(Link link, const DesignView& design, const FitConfig& config) {
    config.validate();
    const Eigen::Index p = design.x.cols();
    ParamVector beta = config.initial_beta.value_or(ParamVector::Zero(p));
    if (beta.size() != p) throw DimensionError("initial beta has the wrong dimension");

    FitResult result;
    auto finish = [&](FitStatus status, const LikelihoodEvaluation& eval) {
        result.status = status;
        result.converged = status == FitStatus::Converged;
        result.beta_hat = beta;
        result.final_score_norm = eval.score.lpNorm<Eigen::Infinity>();
        result.log_likelihood_at_optimum = eval.value;
        return result;
    };

    LikelihoodEvaluation eval = evaluate(link, beta, design, EvalParts::All);
    result.objective_trace.push_back(eval.value);

    double previous_step = std::numeric_limits<double>::infinity();
    int stall = 0;
    for (int iter = 0;; ++iter) {
        result.iterations = iter;
        const double score_norm = eval.score.lpNorm<Eigen::Infinity>();

        Vector step;
        try {
            step = SpdFactor(eval.neg_hessian).solve(eval.score);
        } catch (const SingularMatrixError&) {
            // Curvature that underflows far out along a separating direction
            // is divergence, not rank deficiency of the design.
            const bool diverging = iter > 0 && max_abs_predictor(design, beta) > kExtremePredictor;
            return finish(diverging ? FitStatus::SeparationSuspected : FitStatus::SingularInformation, eval);
        }
        const double step_norm = step.lpNorm<Eigen::Infinity>();
        const double beta_norm = beta.lpNorm<Eigen::Infinity>();

        if (score_norm <= config.gradient_tolerance && step_norm <= kStepTolerance * std::max(1.0, beta_norm))
            return finish(FitStatus::Converged, eval);
        if (beta_norm > kSeparationBetaBound) return finish(FitStatus::SeparationSuspected, eval);
        if (iter >= config.max_iterations) return finish(FitStatus::IterationLimit, eval);

        // A score already at tolerance whose Newton step will not shrink means
        // the curvature is vanishing along the path (the probit signature).
        const bool flat = score_norm <= config.gradient_tolerance;
        if (flat || (step_norm >= kContractionRatio * previous_step && max_abs_predictor(design, beta) > kExtremePredictor))
            ++stall;
        else
            stall = 0;
        if (stall >= kStallLimit) return finish(FitStatus::SeparationSuspected, eval);
        previous_step = step_norm;

        double scale = 1.0;
        bool accepted = false;
        ParamVector candidate;
        for (int h = 0; h <= config.step_halving_limit; ++h, scale *= 0.5) {
            candidate = beta + scale * step;
            const LikelihoodEvaluation trial = evaluate(link, candidate, design, EvalParts::ValueScore);
            // Near the optimum the objective changes by less than its rounding
            // error; a smaller score then decides.
            const double noise = 8.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(eval.value));
            if (trial.value > eval.value ||
                (trial.value >= eval.value - noise && trial.score.lpNorm<Eigen::Infinity>() < score_norm)) {
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            // No ascent is representable: either already optimal to rounding,
            // or the objective is flat along a diverging direction.
            if (score_norm <= config.gradient_tolerance) return finish(FitStatus::Converged, eval);
            const bool diverging = max_abs_predictor(design, beta) > kExtremePredictor;
            return finish(diverging ? FitStatus::SeparationSuspected : FitStatus::IterationLimit, eval);
        }
        beta = std::move(candidate);
        eval = evaluate(link, beta, design, EvalParts::All);
        result.objective_trace.push_back(eval.value);
    }
}

FitResult fit_mle(Link link, const Dataset& data, const FitConfig& config) {
    return fit_design(link, data.design(), config);
}

// ---- Local likelihood --------------------------------------------------------

FitResult fit_local(Link link, const Dataset& data, const CovariateVector& x0, const KernelSpec& spec,
                    const FitConfig& config) {
    if (x0.size() != data.dim()) throw DimensionError("x0 and dataset differ in dimension");
    const Eigen::Index d = data.dim() - 1;
    spec.validate(d);

    const Vector kernel = weights_for(WeightSpec::kernel(x0.features(), spec), data);
    const double mass = kernel.sum();
    if (mass < static_cast<double>(d + 2)) {
        throw LocalMassError("insufficient local mass: sum of kernel weights " + std::to_string(mass) +
                             " is below d + 2 = " + std::to_string(d + 2));
    }
    return fit_mle(link, data.with_weights(kernel), config);
}

std::vector<LocalCurvePoint> local_probability_curve(Link link, const Dataset& data,
                                                     const std::vector<CovariateVector>& grid,
                                                     const KernelSpec& spec, const FitConfig& config) {
    std::vector<LocalCurvePoint> out;
    out.reserve(grid.size());
    for (const auto& x : grid) out.push_back({x, std::numeric_limits<double>::quiet_NaN(), std::nullopt, {}});

    parallel_for(grid.size(), [&](std::size_t k) {
        auto& point = out[k];
        try {
            FitResult fit = fit_local(link, data, point.x, spec, config);
            if (fit.converged) {
                point.probability = mean_response(link, fit.beta_hat, point.x);
            } else {
                point.error = std::string(to_string(fit.status));
            }
            point.fit = std::move(fit);
        } catch (const Error& e) {
            point.error = e.what();
        }
    });
    return out;
}

// ---- Bayes posterior mean ------------------------------------------------------

BayesEstimate fit_bayes_posterior_mean(Link link, const Dataset& data, const PriorSpec& prior, std::size_t draws,
                                       std::uint64_t seed) {
    const Eigen::Index p = data.dim();
    if (static_cast<std::size_t>(p) > kMaxBayesDimension)
        throw DimensionError("posterior mean by importance sampling supports at most 6 coefficients");
    if (prior.mean.size() != p || prior.sd.size() != p) throw DimensionError("prior dimension differs from data");
    for (Eigen::Index k = 0; k < p; ++k)
        if (!(prior.sd[k] > 0.0) || !std::isfinite(prior.mean[k])) throw DataError("prior needs finite mean, sd > 0");
    if (draws == 0) throw std::invalid_argument("draws must be positive");

    const FitResult fit = fit_mle(link, data);
    if (!fit.converged) throw FitError("MLE for the proposal did not converge: " + std::string(to_string(fit.status)));

    const double n = static_cast<double>(data.size());
    const Matrix proposal_cov = kProposalInflation * SpdFactor(information_matrix(link, fit.beta_hat, data)).inverse() / n;
    const Matrix chol = SpdFactor(proposal_cov, std::numeric_limits<double>::infinity()).lower();

    auto log_prior = [&](const ParamVector& b) {
        double s = 0.0;
        for (Eigen::Index k = 0; k < p; ++k) {
            const double u = (b[k] - prior.mean[k]) / prior.sd[k];
            s -= 0.5 * u * u + std::log(prior.sd[k]);
        }
        return s;
    };

    std::vector<double> log_w(draws);
    std::vector<ParamVector> beta(draws);
    const CounterRng root(seed);
    parallel_for(draws, [&](std::size_t k) {
        CounterRng rng = root.substream(k);
        std::normal_distribution<double> normal;
        Vector eps(p);
        for (Eigen::Index j = 0; j < p; ++j) eps[j] = normal(rng);
        beta[k] = fit.beta_hat + chol * eps;
        const double ll = log_likelihood(link, beta[k], data);
        log_w[k] = n * (ll - fit.log_likelihood_at_optimum) + log_prior(beta[k]) + 0.5 * eps.squaredNorm();
    });

    const double top = *std::max_element(log_w.begin(), log_w.end());
    double sum_w = 0.0;
    double sum_w2 = 0.0;
    ParamVector weighted = ParamVector::Zero(p);
    for (std::size_t k = 0; k < draws; ++k) {
        const double w = std::exp(log_w[k] - top);
        sum_w += w;
        sum_w2 += w * w;
        weighted += w * beta[k];
    }
    BayesEstimate out;
    out.effective_sample_size = sum_w * sum_w / sum_w2;
    out.draws = draws;
    out.mle = fit.beta_hat;
    if (out.effective_sample_size < kMinImportanceEss)
        throw ImportanceSamplingError("degenerate importance weights: effective sample size " +
                                      std::to_string(out.effective_sample_size));
    out.posterior_mean = weighted / sum_w;
    return out;
}

}  // namespace misfit
