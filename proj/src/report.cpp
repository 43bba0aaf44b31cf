#include "misfit/report.hpp"

#include <charconv>
#include <cmath>
#include <map>
#include <ostream>

namespace misfit {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};

Json product_json(const ProductFamily& family) {
    return std::visit(overloaded{
                          [](const ProductUniform& u) {
                              return Json{{"kind", "uniform"}, {"lower", to_json(u.lower)}, {"upper", to_json(u.upper)}};
                          },
                          [](const ProductGaussian& g) {
                              return Json{{"kind", "gaussian"}, {"mean", to_json(g.mean)}, {"sd", to_json(g.sd)}};
                          },
                          [](const ProductBeta& b) {
                              return Json{{"kind", "beta"}, {"a", to_json(b.a)}, {"b", to_json(b.b)}};
                          },
                      },
                      family);
}

Json mixture_json(const TwoClassMixture& m) {
    return Json{{"kind", "mixture"}, {"pi0", m.pi0}, {"pi1", m.pi1}, {"class0", product_json(m.f0)},
                {"class1", product_json(m.f1)}};
}

Json std_vector_json(const std::vector<double>& v) {
    Json out = Json::array();
    for (double x : v) out.push_back(to_json(x));
    return out;
}

}  // namespace

std::string format_double(double value) {
    if (std::isnan(value)) return "nan";
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, r.ptr);
}

Json to_json(double value) { return std::isfinite(value) ? Json(value) : Json(nullptr); }

Json to_json(const Vector& v) {
    Json out = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(to_json(v[i]));
    return out;
}

Json to_json(const Matrix& m) {
    Json out = Json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) out.push_back(to_json(Vector(m.row(i).transpose())));
    return out;
}

Json to_json(const FitConfig& config) {
    Json out{{"max_iterations", config.max_iterations},
             {"gradient_tolerance", config.gradient_tolerance},
             {"step_halving_limit", config.step_halving_limit}};
    out["initial_beta"] = config.initial_beta ? to_json(*config.initial_beta) : Json(nullptr);
    return out;
}

Json to_json(const FitResult& fit) {
    return Json{{"beta_hat", to_json(fit.beta_hat)},
                {"converged", fit.converged},
                {"status", to_string(fit.status)},
                {"iterations", fit.iterations},
                {"final_score_norm", to_json(fit.final_score_norm)},
                {"log_likelihood", to_json(fit.log_likelihood_at_optimum)}};
}

Json to_json(const CovarianceReport& report) {
    return Json{{"n", report.n},
                {"J_hat", to_json(report.J_hat)},
                {"K_hat", to_json(report.K_hat)},
                {"naive_covariance", to_json(report.naive_cov)},
                {"sandwich_covariance", to_json(report.sandwich_cov)}};
}

Json to_json(const LeastFalseResult& r) {
    return Json{{"beta0", to_json(r.beta0)},
                {"delta_at_beta0", to_json(r.delta_at_beta0)},
                {"population_J", to_json(r.population_J)},
                {"population_K", to_json(r.population_K)},
                {"population_sandwich", to_json(r.population_sandwich)},
                {"population_naive", to_json(r.population_naive)},
                {"score_norm", to_json(r.score_norm)},
                {"integration_error_estimate", to_json(r.integration_error_estimate)},
                {"integration_backend", to_string(r.backend)},
                {"newton_iterations", r.iterations}};
}

Json to_json(const GofReport& r) {
    return Json{{"statistic", to_json(r.statistic)},
                {"p_value", to_json(r.p_value)},
                {"bootstrap_replicates", r.bootstrap_replicates},
                {"dropped_replicates", r.dropped_replicates},
                {"seed", r.seed}};
}

Json to_json(const CovariateDistribution& H) {
    return std::visit(overloaded{
                          [](const FiniteSupport& f) {
                              Json pts = Json::array();
                              for (const auto& p : f.points) pts.push_back(to_json(p));
                              return Json{{"kind", "finite"},
                                          {"points", pts},
                                          {"probabilities", std_vector_json(f.probabilities)}};
                          },
                          [](const TwoClassMixture& m) { return mixture_json(m); },
                          [](const auto& family) { return product_json(ProductFamily(family)); },
                      },
                      H.kind());
}

Json to_json(const TrueModel& truth) {
    return std::visit(
        overloaded{
            [](const LogisticInFeatures& l) {
                return Json{{"kind", "logistic"},
                            {"beta", to_json(l.beta)},
                            {"features", l.features == FeatureMap::Identity ? "identity" : "beta-log"}};
            },
            [](const StepFunction& s) {
                return Json{{"kind", "step"},
                            {"covariate", s.feature + 1},
                            {"thresholds", std_vector_json(s.thresholds)},
                            {"values", std_vector_json(s.values)}};
            },
            [](const PiecewiseLogistic& p) {
                Json betas = Json::array();
                for (const auto& b : p.betas) betas.push_back(to_json(b));
                return Json{{"kind", "piecewise-logistic"},
                            {"covariate", p.feature + 1},
                            {"thresholds", std_vector_json(p.thresholds)},
                            {"betas", betas}};
            },
            [](const MixtureRatio& m) { return Json{{"kind", "mixture"}, {"mixture", mixture_json(m.mixture)}}; },
            [](const Tabulated& t) {
                return Json{{"kind", "tabulated"}, {"x", std_vector_json(t.x)}, {"q", std_vector_json(t.q)}};
            },
            [](const CallableTruth&) { return Json{{"kind", "callable"}}; },
        },
        truth.kind());
}

Json to_json(const KernelSpec& spec) {
    return Json{{"kernel", to_string(spec.kernel)}, {"bandwidth", to_json(spec.bandwidth)}};
}

Json to_json(const WeightSpec& weight) {
    return std::visit(overloaded{
                          [](const WeightSpec::Unit&) { return Json{{"kind", "unit"}}; },
                          [](const WeightSpec::Indicator& i) {
                              return Json{{"kind", "indicator"},
                                          {"covariate", i.feature + 1},
                                          {"lower", format_double(i.lower)},
                                          {"upper", format_double(i.upper)}};
                          },
                          [](const WeightSpec::Kernel& k) {
                              Json out = to_json(k.spec);
                              out["kind"] = "kernel";
                              out["center"] = to_json(k.center);
                              return out;
                          },
                      },
                      weight.kind());
}

Json to_json(const EstimatorSpec& spec) {
    Json out{{"name", spec.name}, {"kind", estimator_kind_name(spec.kind)}};
    std::visit(overloaded{
                   [](const MleEstimator&) {},
                   [](const GaussianGroupwiseEstimator&) {},
                   [&](const WeightedMleEstimator& e) { out["weight"] = to_json(e.weight); },
                   [&](const LocalEstimator& e) {
                       out["x0"] = to_json(e.x0);
                       out["kernel"] = to_json(e.spec);
                   },
                   [&](const BayesEstimator& e) {
                       out["prior_mean"] = to_json(e.prior.mean);
                       out["prior_sd"] = to_json(e.prior.sd);
                       out["draws"] = e.draws;
                   },
                   [&](const DensityRatioEstimator& e) {
                       out["kernel"] = to_string(e.kernel);
                       out["bandwidth0"] = e.bandwidth0 ? to_json(*e.bandwidth0) : Json("normal-reference");
                       out["bandwidth1"] = e.bandwidth1 ? to_json(*e.bandwidth1) : Json("normal-reference");
                       Json grid = Json::array();
                       for (const auto& g : e.grid) grid.push_back(to_json(g));
                       out["grid"] = grid;
                   },
               },
               spec.kind);
    return out;
}

Json to_json(const Scenario& s) {
    Json estimators = Json::array();
    for (const auto& e : s.estimators) estimators.push_back(to_json(e));
    Json checks = Json::object();
    auto band = [](std::pair<double, double> b) { return Json::array({b.first, b.second}); };
    if (s.checks.mean_within_se) checks["mean_within_se"] = *s.checks.mean_within_se;
    if (s.checks.covariance_rel_tol) checks["covariance_rel_tol"] = *s.checks.covariance_rel_tol;
    if (s.checks.sandwich_coverage) checks["sandwich_coverage"] = band(*s.checks.sandwich_coverage);
    if (s.checks.naive_coverage) checks["naive_coverage"] = band(*s.checks.naive_coverage);
    if (s.checks.naive_coverage_outside) checks["naive_coverage_outside"] = band(*s.checks.naive_coverage_outside);
    if (s.checks.max_mean_abs_deviation) checks["max_mean_abs_deviation"] = *s.checks.max_mean_abs_deviation;
    return Json{{"name", s.name},
                {"link", to_string(s.link)},
                {"n", s.n},
                {"replications", s.replications},
                {"seed", s.seed},
                {"covariates", to_json(s.H)},
                {"truth", to_json(s.truth)},
                {"estimators", estimators},
                {"coverage_levels", std_vector_json(s.coverage_levels)},
                {"oracle_tolerance", s.oracle_tolerance},
                {"fit", to_json(s.fit)},
                {"checks", checks},
                {"failure_budget", kFailureBudget},
                {"covariance_entry_floor", kCovarianceEntryFloor}};
}

Json to_json(const ReplicationSummary& summary) {
    Json estimators = Json::array();
    for (const auto& e : summary.estimators) {
        Json j{{"name", e.name}, {"kind", e.kind}, {"successes", e.successes}, {"failures", e.failures}};
        j["target"] = e.target ? to_json(*e.target) : Json(nullptr);
        if (e.oracle) j["oracle"] = to_json(*e.oracle);
        j["mean"] = to_json(e.mean);
        j["mc_standard_error"] = to_json(e.mc_standard_error);
        auto opt = [&](const char* key, const std::optional<Matrix>& m) { j[key] = m ? to_json(*m) : Json(nullptr); };
        opt("scaled_covariance", e.scaled_covariance);
        if (e.oracle) j["oracle_sandwich"] = to_json(e.oracle->population_sandwich);
        opt("covariance_relative_error", e.covariance_relative_error);
        j["max_covariance_relative_error"] =
            e.max_covariance_relative_error ? to_json(*e.max_covariance_relative_error) : Json(nullptr);
        opt("mean_J_hat", e.mean_J_hat);
        opt("mean_K_hat", e.mean_K_hat);
        opt("mean_scaled_sandwich", e.mean_scaled_sandwich);
        opt("mean_scaled_naive", e.mean_scaled_naive);
        Json coverage = Json::array();
        for (const auto& c : e.coverage)
            coverage.push_back(Json{{"level", c.level},
                                    {"flavor", to_string(c.flavor)},
                                    {"covered", c.covered},
                                    {"rate", std_vector_json(c.rate)}});
        j["coverage"] = coverage;
        if (e.mean_abs_deviation) {
            j["mean_abs_deviation"] = to_json(*e.mean_abs_deviation);
            j["prior_fallbacks"] = e.prior_fallbacks;
        }
        estimators.push_back(j);
    }
    Json verdicts = Json::array();
    for (const auto& v : summary.verdicts)
        verdicts.push_back(
            Json{{"check", v.check}, {"estimator", v.estimator}, {"passed", v.passed}, {"detail", v.detail}});
    return Json{{"scenario", summary.scenario},
                {"n", summary.n},
                {"replications", summary.replications},
                {"seed", summary.seed},
                {"covariance_undefined", summary.covariance_undefined},
                {"estimators", estimators},
                {"verdicts", verdicts}};
}

Json fit_report(Link link, const FitResult& fit, const Dataset& data, double level) {
    Json out = to_json(fit);
    out["link"] = to_string(link);
    out["n"] = data.size();
    out["level"] = level;
    if (!fit.converged) return out;
    const CovarianceReport cov = covariance_report(link, fit, data);
    out["covariance"] = to_json(cov);
    Json coefs = Json::array();
    for (Eigen::Index u = 0; u < fit.beta_hat.size(); ++u) {
        const auto [nl, nh] = wald_interval(cov, fit.beta_hat, u, level, WaldFlavor::Naive);
        const auto [sl, sh] = wald_interval(cov, fit.beta_hat, u, level, WaldFlavor::Sandwich);
        coefs.push_back(Json{{"index", u},
                             {"estimate", to_json(fit.beta_hat[u])},
                             {"naive_se", to_json(std::sqrt(cov.naive_cov(u, u)))},
                             {"sandwich_se", to_json(std::sqrt(cov.sandwich_cov(u, u)))},
                             {"naive_interval", Json::array({to_json(nl), to_json(nh)})},
                             {"sandwich_interval", Json::array({to_json(sl), to_json(sh)})}});
    }
    out["coefficients"] = coefs;
    return out;
}

void write_replication_csv(std::ostream& out, const ReplicationSummary& summary) {
    Eigen::Index betas = 0, grid = 0;
    for (std::size_t e = 0; e < summary.estimators.size(); ++e) {
        const bool dr = summary.estimators[e].kind == "density-ratio";
        for (const auto& r : summary.records)
            if (r.estimator == summary.estimators[e].name) {
                (dr ? grid : betas) = std::max(dr ? grid : betas, r.estimate.size());
            }
    }
    out << "replication,estimator";
    for (Eigen::Index k = 0; k < betas; ++k) out << ",beta_" << k;
    for (Eigen::Index k = 0; k < grid; ++k) out << ",q_" << k;
    out << ",converged,flags\n";
    std::map<std::string, bool> is_grid;
    for (const auto& e : summary.estimators) is_grid[e.name] = e.kind == "density-ratio";
    for (const auto& r : summary.records) {
        out << r.replication << ',' << r.estimator;
        const bool g = is_grid[r.estimator];
        for (Eigen::Index k = 0; k < betas; ++k)
            out << ',' << (!g && k < r.estimate.size() ? format_double(r.estimate[k]) : "");
        for (Eigen::Index k = 0; k < grid; ++k)
            out << ',' << (g && k < r.estimate.size() ? format_double(r.estimate[k]) : "");
        out << ',' << (r.converged ? 1 : 0) << ',' << r.flags << '\n';
    }
}

void write_local_curve_csv(std::ostream& out, const std::vector<LocalCurvePoint>& curve) {
    if (curve.empty()) return;
    const Eigen::Index p = curve.front().x.size();
    for (Eigen::Index k = 1; k < p; ++k) out << "x_" << k << ',';
    out << "q_star";
    for (Eigen::Index k = 0; k < p; ++k) out << ",beta_" << k;
    out << ",ok,error\n";
    for (const auto& pt : curve) {
        for (Eigen::Index k = 1; k < p; ++k) out << format_double(pt.x[k]) << ',';
        out << format_double(pt.probability);
        for (Eigen::Index k = 0; k < p; ++k)
            out << ',' << (pt.fit ? format_double(pt.fit->beta_hat[k]) : std::string("nan"));
        std::string err = pt.error;
        for (char& c : err)
            if (c == ',' || c == '\n') c = ';';
        out << ',' << (pt.ok() ? 1 : 0) << ',' << err << '\n';
    }
}

}  // namespace misfit
