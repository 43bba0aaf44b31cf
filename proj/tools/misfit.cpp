// misfit: fit binary regressions under possible misspecification, query the
// population oracle, run scenario simulations and the J = K bootstrap test.
//
// Exit codes: 0 ok, 2 parse/input error, 3 fit failure, 4 oracle divergence,
// 5 failure budget exceeded, 1 anything else. Errors are also printed to
// stdout as a JSON object {"error": {...}, "config": {...}}.

#include "misfit/report.hpp"
#include "misfit/scenario.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;
using namespace misfit;

namespace {

enum ExitCode { kOk = 0, kOther = 1, kParse = 2, kFit = 3, kOracle = 4, kBudget = 5 };

struct FitFailure : FitError {
    FitFailure(const std::string& what, Json detail_) : FitError(what), detail(std::move(detail_)) {}
    Json detail;
};

void emit(const Json& j, const std::string& path) {
    if (path.empty() || path == "-") {
        std::cout << j.dump(2) << '\n';
        return;
    }
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write " + path);
    out << j.dump(2) << '\n';
}

std::ostream& open_output(const std::string& path, std::ofstream& file) {
    if (path.empty() || path == "-") return std::cout;
    file.open(path);
    if (!file) throw ParseError("cannot write " + path);
    return file;
}

Vector parse_vector(const std::string& text) {
    const auto v = parse_number_list(text);
    return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::vector<Vector> load_grid(const std::string& grid, const std::string& grid_file, Eigen::Index d) {
    if (!grid.empty() && !grid_file.empty()) throw ParseError("give either --grid or --grid-file, not both");
    if (!grid_file.empty()) return read_grid_file(grid_file, d);
    if (grid.empty()) throw ParseError("a grid is required (--grid lo:hi:count or --grid-file)");
    return parse_grid(grid, d);
}

// ---- Commands -----------------------------------------------------------------------

struct FitOptions {
    std::string data, link = "logistic", output, format = "json";
    double level = 0.95;
    FitConfig config;
};

Json fit_config(const FitOptions& o) {
    return Json{{"command", "fit"}, {"data", o.data},     {"link", o.link},          {"level", o.level},
                {"format", o.format}, {"output", o.output}, {"fit", to_json(o.config)}};
}

void run_fit(const FitOptions& o) {
    const Link link = parse_link(o.link);
    o.config.validate();
    if (!(o.level > 0.0 && o.level < 1.0)) throw ParseError("--level must lie in (0, 1)");
    const Dataset data = read_csv_dataset(o.data);
    const FitResult fit = fit_mle(link, data, o.config);
    if (!fit.converged) throw FitFailure("fit did not converge: " + std::string(to_string(fit.status)), to_json(fit));
    const Json report = fit_report(link, fit, data, o.level);
    if (o.format == "json") {
        Json out{{"config", fit_config(o)}, {"result", report}};
        emit(out, o.output);
        return;
    }
    std::ofstream file;
    std::ostream& out = open_output(o.output, file);
    out << "coefficient,estimate,naive_se,sandwich_se,naive_lower,naive_upper,sandwich_lower,sandwich_upper\n";
    for (const auto& c : report["coefficients"]) {
        out << "beta_" << c["index"].get<long>();
        for (const char* key : {"estimate", "naive_se", "sandwich_se"}) out << ',' << format_double(c[key].get<double>());
        for (const char* key : {"naive_interval", "sandwich_interval"})
            out << ',' << format_double(c[key][0].get<double>()) << ',' << format_double(c[key][1].get<double>());
        out << '\n';
    }
}

struct OracleOptions {
    std::string scenario, output;
    std::optional<double> tolerance;
};

void run_oracle(const OracleOptions& o, Json& config) {
    const Scenario s = load_scenario(o.scenario);
    const double tol = o.tolerance.value_or(s.oracle_tolerance);
    config["scenario_config"] = to_json(s);
    config["tolerance"] = tol;
    const LeastFalseResult r = least_false(s.link, s.H, s.truth, tol);
    Json out{{"config", config}, {"least_false", to_json(r)}};
    // Weighted and local estimators aim at their own Delta_w projections.
    Json weighted = Json::array();
    for (const auto& e : s.estimators) {
        std::optional<WeightSpec> w;
        if (const auto* we = std::get_if<WeightedMleEstimator>(&e.kind)) w = we->weight;
        if (const auto* le = std::get_if<LocalEstimator>(&e.kind)) w = WeightSpec::kernel(le->x0, le->spec);
        if (!w || w->is_unit()) continue;
        Json j = to_json(least_false(s.link, s.H, s.truth, tol, *w));
        j["estimator"] = e.name;
        j["weight"] = to_json(*w);
        weighted.push_back(j);
    }
    if (!weighted.empty()) out["weighted_least_false"] = weighted;
    emit(out, o.output);
}

struct SimulateOptions {
    std::string scenario, json, csv;
    std::optional<std::uint64_t> seed;
    std::optional<long long> replications, n;
};

int run_simulate(const SimulateOptions& o, Json& config) {
    Scenario s = load_scenario(o.scenario);
    if (o.seed) s.seed = *o.seed;
    if (o.replications) {
        if (*o.replications < 1) throw ParseError("--replications must be at least 1");
        s.replications = static_cast<std::size_t>(*o.replications);
    }
    if (o.n) s.n = static_cast<Eigen::Index>(*o.n);
    s.validate();
    config["scenario_config"] = to_json(s);

    const ReplicationSummary summary = run_experiment(s);
    Json out{{"config", config}, {"summary", to_json(summary)}};
    emit(out, o.json);
    if (!o.csv.empty()) {
        std::ofstream file(o.csv);
        if (!file) throw ParseError("cannot write " + o.csv);
        write_replication_csv(file, summary);
    }
    // Verdicts go to stderr when the JSON itself is on stdout.
    std::ostream& log = (o.json.empty() || o.json == "-") ? std::cerr : std::cout;
    if (summary.covariance_undefined) log << "NOTE covariance undefined with a single replication\n";
    for (const auto& v : summary.verdicts)
        log << (v.passed ? "PASS " : "FAIL ") << v.check << " [" << v.estimator << "] " << v.detail << '\n';
    return kOk;
}

struct GofOptions {
    std::string data, link = "logistic", output;
    std::size_t replicates = 1000;
    std::uint64_t seed = 0;
    FitConfig config;
};

void run_goftest(const GofOptions& o, const Json& config) {
    const Link link = parse_link(o.link);
    const Dataset data = read_csv_dataset(o.data);
    const FitResult fit = fit_mle(link, data, o.config);
    if (!fit.converged) throw FitFailure("fit did not converge: " + std::string(to_string(fit.status)), to_json(fit));
    const GofReport report = misspecification_test(link, fit, data, o.replicates, o.seed);
    emit(Json{{"config", config}, {"fit", to_json(fit)}, {"result", to_json(report)}}, o.output);
}

struct CurveOptions {
    std::string data, link = "logistic", grid, grid_file, kernel = "gaussian", bandwidth, output;
    FitConfig config;
};

int run_local_curve(const CurveOptions& o) {
    const Link link = parse_link(o.link);
    const Dataset data = read_csv_dataset(o.data);
    const Eigen::Index d = data.dim() - 1;
    KernelSpec spec{parse_kernel(o.kernel), parse_vector(o.bandwidth)};
    if (spec.bandwidth.size() == 1 && d > 1) spec.bandwidth = Vector::Constant(d, spec.bandwidth[0]);
    spec.validate(d);
    std::vector<CovariateVector> grid;
    for (const auto& g : load_grid(o.grid, o.grid_file, d)) grid.push_back(CovariateVector::from_features(g));
    const auto curve = local_probability_curve(link, data, grid, spec, o.config);
    std::ofstream file;
    write_local_curve_csv(open_output(o.output, file), curve);
    const bool any_ok = std::any_of(curve.begin(), curve.end(), [](const auto& p) { return p.ok(); });
    if (!any_ok) {
        std::cerr << "local fits failed at every grid point\n";
        return kFit;
    }
    return kOk;
}

struct RatioOptions {
    std::string data, grid, grid_file, kernel = "gaussian", bandwidth0, bandwidth1, output;
};

void run_density_ratio(const RatioOptions& o) {
    const Dataset data = read_csv_dataset(o.data);
    const Eigen::Index d = data.dim() - 1;
    std::optional<Vector> h0, h1;
    if (!o.bandwidth0.empty()) h0 = parse_vector(o.bandwidth0);
    if (!o.bandwidth1.empty()) h1 = parse_vector(o.bandwidth1);
    const DensityRatioClassifier clf(data, parse_kernel(o.kernel), h0, h1);
    const auto grid = load_grid(o.grid, o.grid_file, d);
    const auto values = clf.probabilities(grid);
    std::ofstream file;
    std::ostream& out = open_output(o.output, file);
    for (Eigen::Index k = 1; k <= d; ++k) out << "x_" << k << ',';
    out << "q_hat,prior_fallback\n";
    for (std::size_t i = 0; i < grid.size(); ++i) {
        for (Eigen::Index k = 0; k < d; ++k) out << format_double(grid[i][k]) << ',';
        out << format_double(values[i].probability) << ',' << (values[i].prior_fallback ? 1 : 0) << '\n';
    }
}

// ---- Error mapping --------------------------------------------------------------------

int fail(const std::string& kind, const std::string& message, int code, const Json& config,
         const Json& detail = nullptr) {
    Json err{{"kind", kind}, {"message", message}, {"exit_code", code}};
    if (!detail.is_null()) err["detail"] = detail;
    std::cout << Json{{"error", err}, {"config", config}}.dump(2) << '\n';
    std::cerr << "misfit: " << message << '\n';
    return code;
}

template <class F>
int guarded(const Json& config, F&& body) {
    try {
        return body();
    } catch (const FitFailure& e) {
        return fail("fit", e.what(), kFit, config, e.detail);
    } catch (const ParseError& e) {
        return fail("parse", e.what(), kParse, config);
    } catch (const DataError& e) {
        return fail("data", e.what(), kParse, config);
    } catch (const DimensionError& e) {
        return fail("data", e.what(), kParse, config);
    } catch (const std::invalid_argument& e) {
        return fail("parse", e.what(), kParse, config);
    } catch (const OracleError& e) {
        return fail("oracle", e.what(), kOracle, config);
    } catch (const BudgetExceededError& e) {
        return fail("budget", e.what(), kBudget, config);
    } catch (const FitError& e) {
        return fail("fit", e.what(), kFit, config);
    } catch (const SingularMatrixError& e) {
        return fail("fit", e.what(), kFit, config);
    } catch (const BootstrapError& e) {
        return fail("fit", e.what(), kFit, config);
    } catch (const ImportanceSamplingError& e) {
        return fail("fit", e.what(), kFit, config);
    } catch (const std::exception& e) {
        return fail("internal", e.what(), kOther, config);
    }
}

void add_fit_flags(CLI::App* cmd, FitConfig& config) {
    cmd->add_option("--max-iterations", config.max_iterations, "Newton iteration cap")->capture_default_str();
    cmd->add_option("--tolerance", config.gradient_tolerance, "score max-norm for convergence")->capture_default_str();
    cmd->add_option("--step-halvings", config.step_halving_limit, "step-halving limit per iteration")
        ->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Binary regression under model misspecification"};
    app.require_subcommand(1);

    FitOptions fit;
    auto* fit_cmd = app.add_subcommand("fit", "maximum likelihood fit with naive and sandwich inference");
    fit_cmd->add_option("data", fit.data, "CSV dataset (header x1..xd,z)")->required()->check(CLI::ExistingFile);
    fit_cmd->add_option("--link", fit.link, "logistic or probit")->capture_default_str();
    fit_cmd->add_option("--level", fit.level, "Wald interval level")->capture_default_str();
    fit_cmd->add_option("--format", fit.format, "json or csv")->check(CLI::IsMember({"json", "csv"}))->capture_default_str();
    fit_cmd->add_option("-o,--output", fit.output, "output path (default stdout)");
    add_fit_flags(fit_cmd, fit.config);

    OracleOptions oracle;
    auto* oracle_cmd = app.add_subcommand("oracle", "least-false parameter, Delta, J and K for a scenario");
    oracle_cmd->add_option("scenario", oracle.scenario, "scenario file")->required()->check(CLI::ExistingFile);
    oracle_cmd->add_option("--tolerance", oracle.tolerance, "solver tolerance (default from scenario)");
    oracle_cmd->add_option("-o,--output", oracle.output, "output path (default stdout)");

    SimulateOptions sim;
    auto* sim_cmd = app.add_subcommand("simulate", "replicated experiment from a scenario");
    sim_cmd->add_option("scenario", sim.scenario, "scenario file")->required()->check(CLI::ExistingFile);
    sim_cmd->add_option("--seed", sim.seed, "override the scenario seed");
    sim_cmd->add_option("--replications", sim.replications, "override the replication count");
    sim_cmd->add_option("--n", sim.n, "override the sample size");
    sim_cmd->add_option("--json", sim.json, "summary JSON path (default stdout)");
    sim_cmd->add_option("--csv", sim.csv, "per-replication CSV path");

    GofOptions gof;
    auto* gof_cmd = app.add_subcommand("goftest", "parametric bootstrap test of J = K");
    gof_cmd->add_option("data", gof.data, "CSV dataset")->required()->check(CLI::ExistingFile);
    gof_cmd->add_option("--link", gof.link, "logistic or probit")->capture_default_str();
    gof_cmd->add_option("--replicates", gof.replicates, "bootstrap replicates (>= 200)")->capture_default_str();
    gof_cmd->add_option("--seed", gof.seed, "random seed")->required();
    gof_cmd->add_option("-o,--output", gof.output, "output path (default stdout)");
    add_fit_flags(gof_cmd, gof.config);

    CurveOptions curve;
    auto* curve_cmd = app.add_subcommand("local-curve", "kernel-local likelihood probability curve (CSV)");
    curve_cmd->add_option("data", curve.data, "CSV dataset")->required()->check(CLI::ExistingFile);
    curve_cmd->add_option("--link", curve.link, "logistic or probit")->capture_default_str();
    curve_cmd->add_option("--grid", curve.grid, "lo:hi:count per covariate, or points a,b|c,d");
    curve_cmd->add_option("--grid-file", curve.grid_file, "one grid point per line")->check(CLI::ExistingFile);
    curve_cmd->add_option("--kernel", curve.kernel, "gaussian, epanechnikov or uniform")->capture_default_str();
    curve_cmd->add_option("--bandwidth", curve.bandwidth, "bandwidth, one per covariate or a single value")
        ->required();
    curve_cmd->add_option("-o,--output", curve.output, "output path (default stdout)");
    add_fit_flags(curve_cmd, curve.config);

    RatioOptions ratio;
    auto* ratio_cmd = app.add_subcommand("density-ratio", "class-wise kernel density ratio classifier (CSV)");
    ratio_cmd->add_option("data", ratio.data, "CSV dataset")->required()->check(CLI::ExistingFile);
    ratio_cmd->add_option("--grid", ratio.grid, "lo:hi:count per covariate, or points a,b|c,d");
    ratio_cmd->add_option("--grid-file", ratio.grid_file, "one grid point per line")->check(CLI::ExistingFile);
    ratio_cmd->add_option("--kernel", ratio.kernel, "gaussian or epanechnikov")->capture_default_str();
    ratio_cmd->add_option("--bandwidth0", ratio.bandwidth0, "class-0 bandwidths (default normal reference)");
    ratio_cmd->add_option("--bandwidth1", ratio.bandwidth1, "class-1 bandwidths (default normal reference)");
    ratio_cmd->add_option("-o,--output", ratio.output, "output path (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        if (rc == 0) return 0;
        return fail("parse", e.what(), kParse, Json{{"argv", std::vector<std::string>(argv, argv + argc)}});
    }

    if (*fit_cmd) return guarded(fit_config(fit), [&] {
            run_fit(fit);
            return int(kOk);
        });
    if (*oracle_cmd) {
        Json config{{"command", "oracle"}, {"scenario", oracle.scenario}, {"output", oracle.output}};
        return guarded(config, [&] {
            run_oracle(oracle, config);
            return int(kOk);
        });
    }
    if (*sim_cmd) {
        Json config{{"command", "simulate"}, {"scenario", sim.scenario}, {"json", sim.json}, {"csv", sim.csv}};
        return guarded(config, [&] { return run_simulate(sim, config); });
    }
    if (*gof_cmd) {
        const Json config{{"command", "goftest"},   {"data", gof.data},         {"link", gof.link},
                          {"replicates", gof.replicates}, {"seed", gof.seed}, {"fit", to_json(gof.config)}};
        return guarded(config, [&] {
            run_goftest(gof, config);
            return int(kOk);
        });
    }
    if (*curve_cmd) {
        const Json config{{"command", "local-curve"}, {"data", curve.data},     {"link", curve.link},
                          {"grid", curve.grid},       {"grid_file", curve.grid_file}, {"kernel", curve.kernel},
                          {"bandwidth", curve.bandwidth}, {"fit", to_json(curve.config)}};
        return guarded(config, [&] { return run_local_curve(curve); });
    }
    const Json config{{"command", "density-ratio"}, {"data", ratio.data},         {"grid", ratio.grid},
                      {"grid_file", ratio.grid_file}, {"kernel", ratio.kernel},   {"bandwidth0", ratio.bandwidth0},
                      {"bandwidth1", ratio.bandwidth1}};
    return guarded(config, [&] {
        run_density_ratio(ratio);
        return int(kOk);
    });
}
