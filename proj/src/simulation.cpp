#include "misfit/simulation.hpp"

#include "misfit/parallel.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <iomanip>
#include <sstream>

namespace misfit {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};

// Stream index for estimator-private randomness (importance draws); far above
// any case index so it never collides with the data streams.
constexpr std::uint64_t kEstimatorStreamBase = std::uint64_t{1} << 62;

std::string fmt(double v) {
    std::ostringstream out;
    out << std::setprecision(4) << v;
    return out.str();
}

bool is_beta_estimator(const EstimatorKind& kind) { return !std::holds_alternative<DensityRatioEstimator>(kind); }

bool has_wald(const EstimatorKind& kind) {
    return std::holds_alternative<MleEstimator>(kind) || std::holds_alternative<WeightedMleEstimator>(kind) ||
           std::holds_alternative<LocalEstimator>(kind);
}

std::optional<WeightSpec> target_weight(const EstimatorKind& kind) {
    return std::visit(overloaded{
                          [](const MleEstimator&) -> std::optional<WeightSpec> { return WeightSpec::unit(); },
                          [](const BayesEstimator&) -> std::optional<WeightSpec> { return WeightSpec::unit(); },
                          [](const WeightedMleEstimator& e) -> std::optional<WeightSpec> { return e.weight; },
                          [](const LocalEstimator& e) -> std::optional<WeightSpec> {
                              return WeightSpec::kernel(e.x0, e.spec);
                          },
                          [](const auto&) -> std::optional<WeightSpec> { return std::nullopt; },
                      },
                      kind);
}

// Exact group-wise target when the truth is an equal-variance Gaussian mixture.
std::optional<Vector> groupwise_target(const Scenario& s) {
    const auto* ratio = std::get_if<MixtureRatio>(&s.truth.kind());
    if (!ratio) return std::nullopt;
    try {
        return gaussian_log_ratio_coefficients(ratio->mixture);
    } catch (const Error&) {
        return std::nullopt;
    }
}

struct Outcome {
    bool ok = false;
    Vector estimate;
    std::string flags;
    std::optional<CovarianceReport> cov;
    // covered[level][flavor][coordinate]
    std::vector<std::array<std::vector<bool>, 2>> covered;
    double abs_deviation = 0.0;
    std::size_t fallbacks = 0;
};

struct Target {
    std::optional<Vector> value;
    std::optional<LeastFalseResult> oracle;
};

void record_wald(Outcome& out, const Scenario& s, const Target& target, const FitResult& fit, const Dataset& data) {
    out.cov = covariance_report(s.link, fit, data);
    if (!target.value) return;
    const Eigen::Index p = fit.beta_hat.size();
    for (double level : s.coverage_levels) {
        std::array<std::vector<bool>, 2> c;
        for (int f = 0; f < 2; ++f) {
            const auto flavor = f == 0 ? WaldFlavor::Naive : WaldFlavor::Sandwich;
            for (Eigen::Index u = 0; u < p; ++u) {
                const auto [lo, hi] = wald_interval(*out.cov, fit.beta_hat, u, level, flavor);
                c[static_cast<std::size_t>(f)].push_back(lo <= (*target.value)[u] && (*target.value)[u] <= hi);
            }
        }
        out.covered.push_back(std::move(c));
    }
}

Outcome run_estimator(const Scenario& s, const EstimatorSpec& spec, std::size_t estimator_index, const Target& target,
                      const Dataset& data, std::size_t rep) {
    Outcome out;
    auto fitted = [&](const FitResult& fit, const Dataset& used) {
        out.estimate = fit.beta_hat;
        if (!fit.converged) {
            out.flags = std::string(to_string(fit.status));
            return;
        }
        record_wald(out, s, target, fit, used);
        out.ok = true;
    };
    try {
        std::visit(overloaded{
                       [&](const MleEstimator&) { fitted(fit_mle(s.link, data, s.fit), data); },
                       [&](const WeightedMleEstimator& e) {
                           const Dataset weighted = data.with_weights(weights_for(e.weight, data));
                           fitted(fit_mle(s.link, weighted, s.fit), weighted);
                       },
                       [&](const LocalEstimator& e) {
                           const FitResult fit =
                               fit_local(s.link, data, CovariateVector::from_features(e.x0), e.spec, s.fit);
                           fitted(fit, data.with_weights(weights_for(WeightSpec::kernel(e.x0, e.spec), data)));
                       },
                       [&](const BayesEstimator& e) {
                           CounterRng stream = CounterRng(s.seed).substream(rep).substream(kEstimatorStreamBase +
                                                                                            estimator_index);
                           const BayesEstimate b = fit_bayes_posterior_mean(s.link, data, e.prior, e.draws, stream());
                           out.estimate = b.posterior_mean;
                           out.ok = true;
                       },
                       [&](const DensityRatioEstimator& e) {
                           const DensityRatioClassifier clf(data, e.kernel, e.bandwidth0, e.bandwidth1);
                           const auto values = clf.probabilities(e.grid);
                           out.estimate.resize(static_cast<Eigen::Index>(values.size()));
                           double dev = 0.0;
                           for (std::size_t g = 0; g < values.size(); ++g) {
                               out.estimate[static_cast<Eigen::Index>(g)] = values[g].probability;
                               out.fallbacks += values[g].prior_fallback;
                               if (target.value) dev += std::abs(values[g].probability - (*target.value)[static_cast<Eigen::Index>(g)]);
                           }
                           out.abs_deviation = values.empty() ? 0.0 : dev / static_cast<double>(values.size());
                           if (out.fallbacks) out.flags = "prior-fallback";
                           out.ok = true;
                       },
                       [&](const GaussianGroupwiseEstimator&) {
                           out.estimate = gaussian_groupwise_fit(data);
                           out.ok = true;
                       },
                   },
                   spec.kind);
    } catch (const Error& e) {
        out.ok = false;
        out.flags = e.what();
    }
    return out;
}

Target make_target(const Scenario& s, const EstimatorSpec& spec) {
    Target t;
    if (const auto w = target_weight(spec.kind)) {
        t.oracle = least_false(s.link, s.H, s.truth, s.oracle_tolerance, *w);
        t.value = t.oracle->beta0;
    } else if (const auto* dr = std::get_if<DensityRatioEstimator>(&spec.kind)) {
        Vector q(static_cast<Eigen::Index>(dr->grid.size()));
        for (std::size_t g = 0; g < dr->grid.size(); ++g) q[static_cast<Eigen::Index>(g)] = s.truth.probability(dr->grid[g]);
        t.value = q;
    } else {
        t.value = groupwise_target(s);
    }
    return t;
}

std::string sanitize_flags(std::string text) {
    for (char& c : text)
        if (c == ',' || c == '\n' || c == '"') c = ';';
    return text;
}

EstimatorSummary summarize(const Scenario& s, const EstimatorSpec& spec, const Target& target,
                           const std::vector<const Outcome*>& outcomes) {
    EstimatorSummary sum;
    sum.name = spec.name;
    sum.kind = std::string(estimator_kind_name(spec.kind));
    sum.target = target.value;
    sum.oracle = target.oracle;

    std::vector<const Outcome*> ok;
    for (const Outcome* o : outcomes) {
        if (o->ok)
            ok.push_back(o);
        else
            ++sum.failures;
    }
    sum.successes = ok.size();
    if (ok.empty()) return sum;

    const Eigen::Index p = ok.front()->estimate.size();
    const auto m = static_cast<double>(ok.size());
    sum.mean = Vector::Zero(p);
    for (const Outcome* o : ok) sum.mean += o->estimate;
    sum.mean /= m;
    Matrix scatter = Matrix::Zero(p, p);
    for (const Outcome* o : ok) {
        const Vector dev = o->estimate - sum.mean;
        scatter += dev * dev.transpose();
    }
    if (ok.size() >= 2) {
        const Matrix cov = scatter / (m - 1.0);
        sum.mc_standard_error = (cov.diagonal().array() / m).sqrt().matrix();
        if (is_beta_estimator(spec.kind)) {
            sum.scaled_covariance = static_cast<double>(s.n) * cov;
            if (target.oracle) {
                const Matrix& ref = target.oracle->population_sandwich;
                Matrix rel = Matrix::Constant(p, p, std::numeric_limits<double>::quiet_NaN());
                double worst = 0.0;
                for (Eigen::Index i = 0; i < p; ++i)
                    for (Eigen::Index j = 0; j < p; ++j)
                        if (std::abs(ref(i, j)) > kCovarianceEntryFloor) {
                            rel(i, j) = std::abs((*sum.scaled_covariance)(i, j) - ref(i, j)) / std::abs(ref(i, j));
                            worst = std::max(worst, rel(i, j));
                        }
                sum.covariance_relative_error = rel;
                sum.max_covariance_relative_error = worst;
            }
        }
    } else {
        sum.mc_standard_error = Vector::Constant(p, std::numeric_limits<double>::quiet_NaN());
    }

    if (ok.front()->cov) {
        Matrix j = Matrix::Zero(p, p), k = j, sw = j, nv = j;
        for (const Outcome* o : ok) {
            j += o->cov->J_hat;
            k += o->cov->K_hat;
            sw += static_cast<double>(o->cov->n) * o->cov->sandwich_cov;
            nv += static_cast<double>(o->cov->n) * o->cov->naive_cov;
        }
        sum.mean_J_hat = j / m;
        sum.mean_K_hat = k / m;
        sum.mean_scaled_sandwich = sw / m;
        sum.mean_scaled_naive = nv / m;
    }
    if (!ok.front()->covered.empty()) {
        for (std::size_t l = 0; l < s.coverage_levels.size(); ++l) {
            for (int f = 0; f < 2; ++f) {
                CoverageCount c;
                c.level = s.coverage_levels[l];
                c.flavor = f == 0 ? WaldFlavor::Naive : WaldFlavor::Sandwich;
                c.covered.assign(static_cast<std::size_t>(p), 0);
                for (const Outcome* o : ok)
                    for (std::size_t u = 0; u < c.covered.size(); ++u) c.covered[u] += o->covered[l][static_cast<std::size_t>(f)][u];
                for (std::size_t cu : c.covered) c.rate.push_back(static_cast<double>(cu) / m);
                sum.coverage.push_back(std::move(c));
            }
        }
    }
    if (std::holds_alternative<DensityRatioEstimator>(spec.kind)) {
        double dev = 0.0;
        for (const Outcome* o : ok) {
            dev += o->abs_deviation;
            sum.prior_fallbacks += o->fallbacks;
        }
        if (target.value) sum.mean_abs_deviation = dev / m;
    }
    return sum;
}

}  // namespace

std::string_view estimator_kind_name(const EstimatorKind& kind) {
    return std::visit(overloaded{
                          [](const MleEstimator&) { return std::string_view("mle"); },
                          [](const WeightedMleEstimator&) { return std::string_view("weighted-mle"); },
                          [](const LocalEstimator&) { return std::string_view("local"); },
                          [](const BayesEstimator&) { return std::string_view("bayes"); },
                          [](const DensityRatioEstimator&) { return std::string_view("density-ratio"); },
                          [](const GaussianGroupwiseEstimator&) { return std::string_view("gaussian-groupwise"); },
                      },
                      kind);
}

void Scenario::validate() const {
    const Eigen::Index d = H.dimension();
    truth.check_dimension(d);
    if (n < d + 2) throw DataError("scenario needs n >= d + 2");
    if (replications < 1) throw DataError("scenario needs at least one replication");
    if (estimators.empty()) throw DataError("scenario declares no estimators");
    if (coverage_levels.empty()) throw DataError("scenario needs at least one coverage level");
    for (double level : coverage_levels)
        if (!(level > 0.0 && level < 1.0)) throw DataError("coverage levels must lie in (0, 1)");
    if (!(oracle_tolerance > 0.0)) throw DataError("oracle tolerance must be positive");
    fit.validate();
    for (const auto& e : estimators) {
        std::visit(overloaded{
                       [&](const LocalEstimator& l) {
                           if (l.x0.size() != d) throw DimensionError("local estimator x0 has the wrong dimension");
                           l.spec.validate(d);
                       },
                       [&](const BayesEstimator& b) {
                           if (b.prior.mean.size() != d + 1 || b.prior.sd.size() != d + 1)
                               throw DimensionError("prior needs one mean and sd per coefficient");
                       },
                       [&](const DensityRatioEstimator& r) {
                           if (r.grid.empty()) throw DataError("density-ratio estimator needs a grid");
                           for (const auto& g : r.grid)
                               if (g.size() != d) throw DimensionError("density-ratio grid point has the wrong dimension");
                       },
                       [](const auto&) {},
                   },
                   e.kind);
    }
}

Dataset draw_dataset(const Scenario& scenario, std::size_t replication) {
    const Eigen::Index d = scenario.H.dimension();
    const CounterRng stream = CounterRng(scenario.seed).substream(replication);
    Matrix x(scenario.n, d + 1);
    Vector z(scenario.n);
    for (Eigen::Index i = 0; i < scenario.n; ++i) {
        CounterRng rng = stream.substream(static_cast<std::uint64_t>(i));
        const Vector features = scenario.H.sample(rng);
        x(i, 0) = 1.0;
        x.row(i).tail(d) = features.transpose();
        z[i] = rng.uniform() < scenario.truth.probability(features) ? 1.0 : 0.0;
    }
    return Dataset(std::move(x), std::move(z));
}

ReplicationSummary run_experiment(const Scenario& scenario) {
    scenario.validate();
    const std::size_t e_count = scenario.estimators.size();

    std::vector<Target> targets;
    for (const auto& spec : scenario.estimators) targets.push_back(make_target(scenario, spec));

    std::vector<std::vector<Outcome>> outcomes(scenario.replications);
    parallel_for(scenario.replications, [&](std::size_t rep) {
        const Dataset data = draw_dataset(scenario, rep);
        auto& row = outcomes[rep];
        row.reserve(e_count);
        for (std::size_t e = 0; e < e_count; ++e)
            row.push_back(run_estimator(scenario, scenario.estimators[e], e, targets[e], data, rep));
    });

    ReplicationSummary summary;
    summary.scenario = scenario.name;
    summary.n = scenario.n;
    summary.replications = scenario.replications;
    summary.seed = scenario.seed;
    summary.covariance_undefined = scenario.replications < 2;

    for (std::size_t rep = 0; rep < scenario.replications; ++rep)
        for (std::size_t e = 0; e < e_count; ++e) {
            const Outcome& o = outcomes[rep][e];
            summary.records.push_back({rep, scenario.estimators[e].name, o.estimate, o.ok, sanitize_flags(o.flags)});
        }

    for (std::size_t e = 0; e < e_count; ++e) {
        std::vector<const Outcome*> column;
        for (std::size_t rep = 0; rep < scenario.replications; ++rep) column.push_back(&outcomes[rep][e]);
        EstimatorSummary s = summarize(scenario, scenario.estimators[e], targets[e], column);
        if (static_cast<double>(s.failures) > kFailureBudget * static_cast<double>(scenario.replications)) {
            std::string first;
            for (const Outcome* o : column)
                if (!o->ok) {
                    first = o->flags;
                    break;
                }
            throw BudgetExceededError("estimator '" + s.name + "' failed in " + std::to_string(s.failures) + " of " +
                                      std::to_string(scenario.replications) + " replications (budget 5%); first: " + first);
        }
        summary.estimators.push_back(std::move(s));
    }
    summary.verdicts = evaluate_checks(scenario, summary);
    return summary;
}

std::vector<CheckVerdict> evaluate_checks(const Scenario& scenario, const ReplicationSummary& summary) {
    const ScenarioChecks& c = scenario.checks;
    std::vector<CheckVerdict> out;
    for (std::size_t e = 0; e < summary.estimators.size(); ++e) {
        const EstimatorSummary& s = summary.estimators[e];
        const EstimatorKind& kind = scenario.estimators[e].kind;
        const bool beta = is_beta_estimator(kind);

        if (c.mean_within_se && beta && s.target && s.successes >= 2) {
            bool pass = true;
            std::string detail;
            for (Eigen::Index u = 0; u < s.mean.size(); ++u) {
                const double z = std::abs(s.mean[u] - (*s.target)[u]) / s.mc_standard_error[u];
                pass = pass && z <= *c.mean_within_se;
                detail += (u ? ", " : "") + std::string("beta_") + std::to_string(u) + " off by " + fmt(z) + " SE";
            }
            out.push_back({"mean-within-se", s.name, pass, detail});
        }
        if (c.covariance_rel_tol && beta && s.oracle) {
            const bool defined = s.max_covariance_relative_error.has_value();
            const bool pass = defined && *s.max_covariance_relative_error <= *c.covariance_rel_tol;
            out.push_back({"covariance-vs-oracle", s.name, pass,
                           defined ? "max relative error " + fmt(*s.max_covariance_relative_error) + " (tolerance " +
                                         fmt(*c.covariance_rel_tol) + ")"
                                   : "covariance undefined"});
        }
        if (has_wald(kind) && !s.coverage.empty()) {
            // Bands refer to the first declared level.
            const CoverageCount& naive = s.coverage[0];
            const CoverageCount& sandwich = s.coverage[1];
            auto rates = [](const CoverageCount& cc) {
                std::string t;
                for (std::size_t u = 0; u < cc.rate.size(); ++u) t += (u ? ", " : "") + fmt(cc.rate[u]);
                return t;
            };
            auto inside = [](const CoverageCount& cc, std::pair<double, double> band) {
                for (double r : cc.rate)
                    if (r < band.first || r > band.second) return false;
                return true;
            };
            if (c.sandwich_coverage)
                out.push_back({"sandwich-coverage", s.name, inside(sandwich, *c.sandwich_coverage),
                               "rates " + rates(sandwich)});
            if (c.naive_coverage)
                out.push_back({"naive-coverage", s.name, inside(naive, *c.naive_coverage), "rates " + rates(naive)});
            if (c.naive_coverage_outside && s.oracle) {
                const auto [lo, hi] = *c.naive_coverage_outside;
                bool pass = false;
                std::string detail = "rates " + rates(naive) + "; predicted";
                for (std::size_t u = 0; u < naive.rate.size(); ++u) {
                    const auto i = static_cast<Eigen::Index>(u);
                    // Naive intervals are too narrow where J^{-1} < J^{-1} K J^{-1}.
                    const bool under = s.oracle->population_naive(i, i) < s.oracle->population_sandwich(i, i);
                    detail += under ? " low" : " high";
                    if (under ? naive.rate[u] < lo : naive.rate[u] > hi) pass = true;
                }
                out.push_back({"naive-coverage-outside", s.name, pass, detail});
            }
        }
        if (c.max_mean_abs_deviation && s.mean_abs_deviation)
            out.push_back({"density-ratio-deviation", s.name, *s.mean_abs_deviation <= *c.max_mean_abs_deviation,
                           "mean |q_hat - q| " + fmt(*s.mean_abs_deviation)});
    }
    return out;
}

std::vector<ConvergencePoint> convergence_curve(const Scenario& scenario, const std::vector<Eigen::Index>& sizes,
                                                std::size_t replications) {
    auto it = std::find_if(scenario.estimators.begin(), scenario.estimators.end(),
                           [](const EstimatorSpec& e) { return target_weight(e.kind).has_value(); });
    if (it == scenario.estimators.end()) throw DataError("convergence curve needs an estimator with an oracle target");
    std::vector<ConvergencePoint> curve;
    for (Eigen::Index n : sizes) {
        Scenario s = scenario;
        s.n = n;
        s.replications = replications;
        s.estimators = {*it};
        s.checks = {};
        const ReplicationSummary summary = run_experiment(s);
        const EstimatorSummary& est = summary.estimators.front();
        double dev = 0.0;
        std::size_t count = 0;
        for (const auto& r : summary.records)
            if (r.converged) {
                dev += (r.estimate - *est.target).lpNorm<Eigen::Infinity>();
                ++count;
            }
        curve.push_back({n, count ? dev / static_cast<double>(count) : std::numeric_limits<double>::quiet_NaN(),
                         est.max_covariance_relative_error.value_or(std::numeric_limits<double>::quiet_NaN())});
    }
    return curve;
}

}  // namespace misfit
