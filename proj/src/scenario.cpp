#include "misfit/scenario.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

namespace misfit {

namespace pt = boost::property_tree;

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= s.size(); ++i)
        if (i == s.size() || s[i] == sep) {
            out.push_back(trim(s.substr(start, i - start)));
            start = i + 1;
        }
    return out;
}

// Line numbers of sections and keys, kept for error messages.
class LineIndex {
public:
    explicit LineIndex(const std::string& text) {
        std::istringstream in(text);
        std::string line, section;
        for (std::size_t no = 1; std::getline(in, line); ++no) {
            const auto t = trim(line);
            if (t.empty() || t.front() == ';' || t.front() == '#') continue;
            if (t.front() == '[') {
                section = std::string(trim(t.substr(1, t.find(']') - 1)));
                lines_[section] = no;
            } else if (const auto eq = t.find('='); eq != std::string_view::npos) {
                lines_[section + "\n" + std::string(trim(t.substr(0, eq)))] = no;
            }
        }
    }
    std::size_t section(const std::string& s) const { return find(s); }
    std::size_t key(const std::string& s, const std::string& k) const { return find(s + "\n" + k); }

private:
    std::size_t find(const std::string& k) const {
        const auto it = lines_.find(k);
        return it == lines_.end() ? 0 : it->second;
    }
    std::map<std::string, std::size_t> lines_;
};

// One INI section with typed accessors; every key must be consumed.
class Section {
public:
    Section(std::string name, const pt::ptree& tree, const LineIndex& lines) : name_(std::move(name)), lines_(lines) {
        for (const auto& [k, v] : tree) values_[k] = v.data();
    }

    bool has(const std::string& key) const { return values_.count(key) != 0; }

    std::string text(const std::string& key) const {
        const auto it = values_.find(key);
        if (it == values_.end()) fail("missing key '" + key + "'", lines_.section(name_));
        used_.insert(key);
        return it->second;
    }
    std::string text(const std::string& key, const std::string& fallback) const {
        return has(key) ? text(key) : fallback;
    }
    double number(const std::string& key) const { return wrap(key, [&] { return parse_number(text(key)); }); }
    double number(const std::string& key, double fallback) const { return has(key) ? number(key) : fallback; }
    long long integer(const std::string& key) const {
        return wrap(key, [&] {
            const std::string t = text(key);
            long long v = 0;
            const auto r = std::from_chars(t.data(), t.data() + t.size(), v);
            if (r.ec != std::errc() || r.ptr != t.data() + t.size()) throw ParseError("expected an integer, got '" + t + "'");
            return v;
        });
    }
    long long integer(const std::string& key, long long fallback) const { return has(key) ? integer(key) : fallback; }
    std::uint64_t unsigned_integer(const std::string& key) const {
        return wrap(key, [&] {
            const std::string t = text(key);
            std::uint64_t v = 0;
            const auto r = std::from_chars(t.data(), t.data() + t.size(), v);
            if (r.ec != std::errc() || r.ptr != t.data() + t.size())
                throw ParseError("expected a nonnegative integer, got '" + t + "'");
            return v;
        });
    }
    Vector vector(const std::string& key) const {
        return wrap(key, [&] {
            const auto v = parse_number_list(text(key));
            return Vector(Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size())));
        });
    }
    std::vector<Vector> rows(const std::string& key) const {
        return wrap(key, [&] {
            std::vector<Vector> out;
            for (auto row : split(text(key), '|')) {
                const auto v = parse_number_list(row);
                out.emplace_back(Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size())));
            }
            return out;
        });
    }
    std::pair<double, double> band(const std::string& key) const {
        return wrap(key, [&] {
            const auto v = parse_number_list(text(key));
            if (v.size() != 2 || !(v[0] <= v[1])) throw ParseError("expected 'low, high'");
            return std::pair{v[0], v[1]};
        });
    }

    /// Runs f, re-throwing any library error as a ParseError located at key.
    template <class F>
    auto wrap(const std::string& key, F&& f) const -> decltype(f()) {
        try {
            return f();
        } catch (const ParseError& e) {
            if (e.line()) throw;
            fail(key + ": " + e.what(), lines_.key(name_, key));
        } catch (const Error& e) {
            fail(key + ": " + e.what(), lines_.key(name_, key));
        } catch (const std::invalid_argument& e) {
            fail(key + ": " + e.what(), lines_.key(name_, key));
        }
    }

    void finish() const {
        for (const auto& [k, v] : values_)
            if (!used_.count(k)) fail("unknown key '" + k + "'", lines_.key(name_, k));
    }

    [[noreturn]] void fail(const std::string& what, std::size_t line) const {
        throw ParseError("[" + name_ + "] " + what, line);
    }
    const std::string& name() const { return name_; }
    std::size_t line() const { return lines_.section(name_); }
    std::size_t key_line(const std::string& key) const { return lines_.key(name_, key); }

private:
    std::string name_;
    const LineIndex& lines_;
    std::map<std::string, std::string> values_;
    mutable std::set<std::string> used_;
};

Eigen::Index covariate_index(const Section& s, const std::string& key) {
    const long long one_based = s.integer(key);
    if (one_based < 1) s.fail(key + ": covariate indices count from 1", s.line());
    return static_cast<Eigen::Index>(one_based - 1);
}

ProductFamily product_family(const Section& s, const std::string& prefix) {
    const std::string kind = s.text(prefix + "kind");
    if (kind == "uniform") return ProductUniform{s.vector(prefix + "lower"), s.vector(prefix + "upper")};
    if (kind == "gaussian") return ProductGaussian{s.vector(prefix + "mean"), s.vector(prefix + "sd")};
    if (kind == "beta") return ProductBeta{s.vector(prefix + "a"), s.vector(prefix + "b")};
    s.fail("unknown covariate family '" + kind + "'", s.key_line(prefix + "kind"));
}

CovariateDistribution covariates(const Section& s) {
    return s.wrap("kind", [&] {
        const std::string kind = s.text("kind");
        if (kind == "finite") {
            const auto probs = s.vector("probabilities");
            return CovariateDistribution(
                FiniteSupport{s.rows("points"), std::vector<double>(probs.data(), probs.data() + probs.size())});
        }
        if (kind == "mixture") {
            TwoClassMixture m;
            m.pi0 = s.number("pi0");
            m.pi1 = s.number("pi1", 1.0 - m.pi0);
            m.f0 = product_family(s, "class0.");
            m.f1 = product_family(s, "class1.");
            return CovariateDistribution(m);
        }
        return std::visit([](const auto& f) { return CovariateDistribution(f); }, product_family(s, ""));
    });
}

TrueModel truth(const Section& s, const CovariateDistribution& H) {
    return s.wrap("kind", [&] {
        const std::string kind = s.text("kind");
        if (kind == "logistic") {
            const std::string map = s.text("features", "identity");
            FeatureMap fm = FeatureMap::Identity;
            if (map == "beta-log")
                fm = FeatureMap::BetaLog;
            else if (map != "identity")
                s.fail("unknown feature map '" + map + "'", s.key_line("features"));
            return TrueModel(LogisticInFeatures{s.vector("beta"), fm});
        }
        if (kind == "step") {
            const Vector t = s.vector("thresholds"), v = s.vector("values");
            return TrueModel(StepFunction{covariate_index(s, "covariate"), std::vector<double>(t.begin(), t.end()),
                                          std::vector<double>(v.begin(), v.end())});
        }
        if (kind == "piecewise-logistic") {
            const Vector t = s.vector("thresholds");
            return TrueModel(PiecewiseLogistic{covariate_index(s, "covariate"), std::vector<double>(t.begin(), t.end()),
                                               s.rows("betas")});
        }
        if (kind == "mixture") {
            const auto* m = std::get_if<TwoClassMixture>(&H.kind());
            if (!m) s.fail("a mixture truth needs mixture covariates", s.line());
            return TrueModel(MixtureRatio{*m});
        }
        if (kind == "tabulated") {
            const Vector x = s.vector("x"), q = s.vector("q");
            return TrueModel(Tabulated{std::vector<double>(x.begin(), x.end()), std::vector<double>(q.begin(), q.end())});
        }
        s.fail("unknown truth kind '" + kind + "'", s.key_line("kind"));
    });
}

KernelSpec kernel_spec(const Section& s) {
    return s.wrap("kernel", [&] { return KernelSpec{parse_kernel(s.text("kernel", "gaussian")), s.vector("bandwidth")}; });
}

Vector broadcast(const Vector& v, Eigen::Index size) { return v.size() == 1 ? Vector::Constant(size, v[0]) : v; }

EstimatorSpec estimator(const Section& s, Eigen::Index d) {
    EstimatorSpec spec;
    spec.name = s.name().substr(std::string("estimator.").size());
    const std::string kind = s.text("kind");
    if (kind == "mle") {
        spec.kind = MleEstimator{};
    } else if (kind == "weighted-mle") {
        const std::string w = s.text("weight");
        WeightedMleEstimator e;
        if (w == "indicator") {
            const double inf = std::numeric_limits<double>::infinity();
            const Eigen::Index k = covariate_index(s, "covariate");
            const double lo = s.number("lower", -inf), hi = s.number("upper", inf);
            e.weight = s.wrap("weight", [&] { return WeightSpec::indicator(k, lo, hi); });
        } else if (w == "kernel") {
            e.weight = WeightSpec::kernel(s.vector("center"), kernel_spec(s));
        } else if (w != "unit") {
            s.fail("unknown weight '" + w + "'", s.key_line("weight"));
        }
        spec.kind = e;
    } else if (kind == "local") {
        spec.kind = LocalEstimator{s.vector("x0"), kernel_spec(s)};
    } else if (kind == "bayes") {
        BayesEstimator e;
        e.prior.mean = broadcast(s.has("prior_mean") ? s.vector("prior_mean") : Vector::Zero(1), d + 1);
        e.prior.sd = broadcast(s.vector("prior_sd"), d + 1);
        e.draws = static_cast<std::size_t>(s.integer("draws", static_cast<long long>(e.draws)));
        spec.kind = e;
    } else if (kind == "density-ratio") {
        DensityRatioEstimator e;
        e.kernel = s.wrap("kernel", [&] { return parse_kernel(s.text("kernel", "gaussian")); });
        if (s.has("bandwidth0")) e.bandwidth0 = s.vector("bandwidth0");
        if (s.has("bandwidth1")) e.bandwidth1 = s.vector("bandwidth1");
        e.grid = s.wrap("grid", [&] { return parse_grid(s.text("grid"), d); });
        spec.kind = e;
    } else if (kind == "gaussian-groupwise") {
        spec.kind = GaussianGroupwiseEstimator{};
    } else {
        s.fail("unknown estimator kind '" + kind + "'", s.key_line("kind"));
    }
    s.finish();
    return spec;
}

}  // namespace

double parse_number(std::string_view text) {
    text = trim(text);
    if (const auto slash = text.find('/'); slash != std::string_view::npos) {
        const double den = parse_number(text.substr(slash + 1));
        if (den == 0.0) throw ParseError("zero denominator in '" + std::string(text) + "'");
        return parse_number(text.substr(0, slash)) / den;
    }
    if (!text.empty() && text.front() == '+') text.remove_prefix(1);
    double v = 0.0;
    const auto r = std::from_chars(text.data(), text.data() + text.size(), v);
    if (text.empty() || r.ec != std::errc() || r.ptr != text.data() + text.size())
        throw ParseError("expected a number, got '" + std::string(text) + "'");
    return v;
}

std::vector<double> parse_number_list(std::string_view text) {
    std::vector<double> out;
    for (auto item : split(text, ',')) out.push_back(parse_number(item));
    return out;
}

std::vector<Vector> parse_grid(std::string_view text, Eigen::Index dimension) {
    text = trim(text);
    std::vector<Vector> points;
    if (text.find(':') != std::string_view::npos) {
        std::vector<std::vector<double>> axes;
        for (auto range : split(text, ',')) {
            const auto parts = split(range, ':');
            if (parts.size() != 3) throw ParseError("grid ranges are written lo:hi:count");
            const double lo = parse_number(parts[0]), hi = parse_number(parts[1]);
            const double count = parse_number(parts[2]);
            if (!(count >= 1) || count != std::floor(count)) throw ParseError("grid count must be a positive integer");
            if (count > 1 && !(lo < hi)) throw ParseError("grid range needs lo < hi");
            std::vector<double> axis;
            const auto m = static_cast<int>(count);
            for (int i = 0; i < m; ++i) axis.push_back(m == 1 ? lo : lo + (hi - lo) * i / (m - 1));
            axes.push_back(std::move(axis));
        }
        if (static_cast<Eigen::Index>(axes.size()) != dimension)
            throw DimensionError("grid needs one range per covariate (" + std::to_string(dimension) + ")");
        std::vector<std::size_t> idx(axes.size(), 0);
        while (true) {
            Vector p(dimension);
            for (std::size_t k = 0; k < axes.size(); ++k) p[static_cast<Eigen::Index>(k)] = axes[k][idx[k]];
            points.push_back(p);
            std::size_t k = axes.size();
            while (k > 0 && ++idx[k - 1] == axes[k - 1].size()) idx[--k] = 0;
            if (k == 0) break;
        }
        return points;
    }
    for (auto row : split(text, '|')) {
        const auto v = parse_number_list(row);
        if (static_cast<Eigen::Index>(v.size()) != dimension)
            throw DimensionError("grid point has " + std::to_string(v.size()) + " coordinates, expected " +
                                 std::to_string(dimension));
        points.emplace_back(Eigen::Map<const Vector>(v.data(), dimension));
    }
    return points;
}

std::vector<Vector> read_grid_file(const std::filesystem::path& path, Eigen::Index dimension) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open grid file " + path.string());
    std::vector<Vector> points;
    std::string line;
    for (std::size_t no = 1; std::getline(in, line); ++no) {
        const auto t = trim(line);
        if (t.empty() || t.front() == '#') continue;
        try {
            const auto v = parse_number_list(t);
            if (static_cast<Eigen::Index>(v.size()) != dimension) throw ParseError("wrong number of coordinates");
            points.emplace_back(Eigen::Map<const Vector>(v.data(), dimension));
        } catch (const Error& e) {
            throw ParseError(e.what(), no);
        }
    }
    if (points.empty()) throw ParseError("grid file holds no points");
    return points;
}

Scenario parse_scenario(std::istream& in) {
    const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const LineIndex lines(text);
    pt::ptree tree;
    try {
        std::istringstream stream(text);
        pt::read_ini(stream, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ParseError(e.message(), e.line());
    }

    const pt::ptree empty;
    auto section = [&](const std::string& name) {
        const auto it = tree.find(name);
        return Section(name, it == tree.not_found() ? empty : it->second, lines);
    };
    for (const auto& [name, body] : tree) {
        static const std::set<std::string> known{"scenario", "covariates", "truth", "fit", "checks"};
        if (!known.count(name) && name.rfind("estimator.", 0) != 0)
            throw ParseError("unknown section [" + name + "]", lines.section(name));
        if (body.data().size() && body.empty()) throw ParseError("key outside any section", lines.section(name));
    }
    if (tree.find("covariates") == tree.not_found()) throw ParseError("missing section [covariates]");
    if (tree.find("truth") == tree.not_found()) throw ParseError("missing section [truth]");

    const Section head = section("scenario");
    const Section cov = section("covariates");
    const Section tru = section("truth");
    CovariateDistribution H = covariates(cov);
    TrueModel q = truth(tru, H);
    cov.finish();
    tru.finish();

    Scenario s(head.text("name", "scenario"), std::move(H), std::move(q));
    s.link = head.wrap("link", [&] { return parse_link(head.text("link", "logistic")); });
    s.n = static_cast<Eigen::Index>(head.integer("n"));
    const long long reps = head.integer("replications", 1);
    if (reps < 1) head.fail("replications must be at least 1", lines.key("scenario", "replications"));
    s.replications = static_cast<std::size_t>(reps);
    s.seed = head.unsigned_integer("seed");
    if (head.has("coverage_levels")) {
        const Vector levels = head.vector("coverage_levels");
        s.coverage_levels.assign(levels.begin(), levels.end());
    }
    s.oracle_tolerance = head.number("oracle_tolerance", s.oracle_tolerance);
    head.finish();

    const Section fit = section("fit");
    s.fit.max_iterations = static_cast<int>(fit.integer("max_iterations", s.fit.max_iterations));
    s.fit.gradient_tolerance = fit.number("gradient_tolerance", s.fit.gradient_tolerance);
    s.fit.step_halving_limit = static_cast<int>(fit.integer("step_halving_limit", s.fit.step_halving_limit));
    fit.finish();

    const Section checks = section("checks");
    if (checks.has("mean_within_se")) s.checks.mean_within_se = checks.number("mean_within_se");
    if (checks.has("covariance_rel_tol")) s.checks.covariance_rel_tol = checks.number("covariance_rel_tol");
    if (checks.has("sandwich_coverage")) s.checks.sandwich_coverage = checks.band("sandwich_coverage");
    if (checks.has("naive_coverage")) s.checks.naive_coverage = checks.band("naive_coverage");
    if (checks.has("naive_coverage_outside")) s.checks.naive_coverage_outside = checks.band("naive_coverage_outside");
    if (checks.has("max_mean_abs_deviation")) s.checks.max_mean_abs_deviation = checks.number("max_mean_abs_deviation");
    checks.finish();

    const Eigen::Index d = s.H.dimension();
    for (const auto& [name, body] : tree)
        if (name.rfind("estimator.", 0) == 0) s.estimators.push_back(estimator(Section(name, body, lines), d));

    try {
        s.validate();
    } catch (const ParseError&) {
        throw;
    } catch (const Error& e) {
        throw ParseError(std::string("invalid scenario: ") + e.what());
    }
    return s;
}

Scenario load_scenario(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open scenario file " + path.string());
    return parse_scenario(in);
}

}  // namespace misfit
