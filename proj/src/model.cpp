#include "misfit/model.hpp"

#include <boost/math/special_functions/erf.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <string>

namespace misfit {

std::string_view to_string(Link link) {
    switch (link) {
        case Link::Logistic: return "logistic";
        case Link::Probit: return "probit";
    }
    return "unknown";
}

Link parse_link(std::string_view name) {
    if (name == "logistic" || name == "logit") return Link::Logistic;
    if (name == "probit") return Link::Probit;
    throw ParseError("unknown link '" + std::string(name) + "'");
}

// ---- CovariateVector ------------------------------------------------------

CovariateVector::CovariateVector(Vector values) : values_(std::move(values)) {
    if (values_.size() < 1) throw DimensionError("covariate vector must hold the intercept");
    if (values_[0] != 1.0) throw DataError("covariate vector must start with the intercept 1");
    if (!values_.allFinite()) throw DataError("non-finite covariate");
}

CovariateVector CovariateVector::from_features(std::span<const double> features) {
    Vector v(static_cast<Eigen::Index>(features.size()) + 1);
    v[0] = 1.0;
    for (std::size_t i = 0; i < features.size(); ++i) v[static_cast<Eigen::Index>(i) + 1] = features[i];
    return CovariateVector(std::move(v));
}

CovariateVector CovariateVector::from_features(const Vector& features) {
    return from_features(std::span<const double>(features.data(), static_cast<std::size_t>(features.size())));
}

// ---- Dataset ---------------------------------------------------------------

namespace {

void check_weights(const Vector& w, Eigen::Index n) {
    if (w.size() != n) throw DimensionError("weight vector length differs from the number of observations");
    bool any_positive = false;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (!std::isfinite(w[i]) || w[i] < 0.0) throw DataError("weights must be finite and nonnegative");
        any_positive = any_positive || w[i] > 0.0;
    }
    if (!any_positive) throw DataError("at least one weight must be positive");
}

}  // namespace

Dataset::Dataset(Matrix covariates, Vector outcomes, std::optional<Vector> weights)
    : x_(std::move(covariates)), z_(std::move(outcomes)), weights_(std::move(weights)) {
    if (x_.rows() == 0) throw DataError("empty dataset");
    if (x_.cols() < 1) throw DimensionError("design needs at least the intercept column");
    if (z_.size() != x_.rows()) throw DimensionError("outcome vector length differs from the number of rows");
    for (Eigen::Index i = 0; i < x_.rows(); ++i) {
        if (x_(i, 0) != 1.0) throw DataError("design column 0 must be the intercept 1");
        if (!x_.row(i).allFinite()) throw DataError("non-finite covariate");
        if (z_[i] != 0.0 && z_[i] != 1.0) throw DataError("non-binary outcome");
    }
    if (weights_) {
        check_weights(*weights_, x_.rows());
        case_weights_ = *weights_;
    } else {
        case_weights_ = Vector::Ones(x_.rows());
    }
    design_weights_ = case_weights_ / static_cast<double>(x_.rows());
}

Dataset Dataset::from_observations(std::span<const Observation> observations, std::optional<Vector> weights) {
    if (observations.empty()) throw DataError("empty dataset");
    const Eigen::Index p = observations.front().x.size();
    Matrix x(static_cast<Eigen::Index>(observations.size()), p);
    Vector z(x.rows());
    for (std::size_t i = 0; i < observations.size(); ++i) {
        const auto& obs = observations[i];
        if (obs.x.size() != p) throw DataError("inconsistent dimensions");
        x.row(static_cast<Eigen::Index>(i)) = obs.x.values().transpose();
        z[static_cast<Eigen::Index>(i)] = obs.z;
    }
    return Dataset(std::move(x), std::move(z), std::move(weights));
}

Dataset Dataset::with_weights(Vector weights) const { return Dataset(x_, z_, std::move(weights)); }

Dataset Dataset::without_weights() const { return Dataset(x_, z_); }

// ---- Link functions --------------------------------------------------------

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;
// Below this argument Phi is evaluated through the Mills-ratio continued fraction.
constexpr double kTailCut = -20.0;

// Mills ratio Phi(-x)/phi(x) for large positive x, by backward evaluation of
// R(x) = 1/(x + 1/(x + 2/(x + 3/(x + ...)))).
double mills_ratio_tail(double x) {
    double f = x;
    for (int k = 120; k >= 1; --k) f = x + k / f;
    return 1.0 / f;
}

double softplus(double t) { return std::max(t, 0.0) + std::log1p(std::exp(-std::abs(t))); }

double sigmoid(double t) {
    if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
    const double e = std::exp(t);
    return e / (1.0 + e);
}

}  // namespace

double normal_pdf(double t) { return kInvSqrt2Pi * std::exp(-0.5 * t * t); }

double normal_cdf(double t) { return 0.5 * std::erfc(-t * kInvSqrt2); }

double log_normal_cdf(double t) {
    if (t > 0.0) return std::log1p(-0.5 * std::erfc(t * kInvSqrt2));
    if (t > kTailCut) return std::log(0.5 * std::erfc(-t * kInvSqrt2));
    return std::log(kInvSqrt2Pi) - 0.5 * t * t + std::log(mills_ratio_tail(-t));
}

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw std::domain_error("normal_quantile: p must lie in (0, 1)");
    return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

double inverse_mills_ratio(double t) {
    if (t > kTailCut) return normal_pdf(t) / normal_cdf(t);
    return 1.0 / mills_ratio_tail(-t);
}

double link_mean(Link link, double t) {
    switch (link) {
        case Link::Logistic: return sigmoid(t);
        case Link::Probit: return normal_cdf(t);
    }
    return std::numeric_limits<double>::quiet_NaN();
}

double log_link_mean(Link link, double t) {
    switch (link) {
        case Link::Logistic: return -softplus(-t);
        case Link::Probit: return log_normal_cdf(t);
    }
    return std::numeric_limits<double>::quiet_NaN();
}

CaseTerms case_terms(Link link, double t, double y) {
    if (link == Link::Logistic) {
        // z*t - log(1 + exp(t)) form of the Bernoulli log-likelihood.
        const double q = sigmoid(t);
        return {y * t - softplus(t), y - q, q * sigmoid(-t)};
    }
    CaseTerms out{0.0, 0.0, 0.0};
    if (y > 0.0) {
        const double r = inverse_mills_ratio(t);
        out.log_lik += y * log_normal_cdf(t);
        out.slope += y * r;
        out.curvature += y * r * (t + r);
    }
    if (y < 1.0) {
        const double r = inverse_mills_ratio(-t);
        out.log_lik += (1.0 - y) * log_normal_cdf(-t);
        out.slope -= (1.0 - y) * r;
        out.curvature += (1.0 - y) * r * (r - t);
    }
    return out;
}

double case_slope(Link link, double t, int z) {
    if (link == Link::Logistic) return z - sigmoid(t);
    return z == 1 ? inverse_mills_ratio(t) : -inverse_mills_ratio(-t);
}

double linear_predictor(const ParamVector& beta, const CovariateVector& x) {
    if (beta.size() != x.size()) throw DimensionError("beta and x differ in dimension");
    return beta.dot(x.values());
}

double mean_response(Link link, const ParamVector& beta, const CovariateVector& x) {
    return link_mean(link, linear_predictor(beta, x));
}

// ---- Dataset construction -------------------------------------------------

Dataset validate_dataset(const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) throw DataError("empty dataset");
    const std::size_t width = rows.front().size();
    if (width < 1) throw DataError("row must contain the outcome z");
    Matrix x(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width));
    Vector z(x.rows());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& row = rows[i];
        const auto r = static_cast<Eigen::Index>(i);
        if (row.size() != width) throw DataError("inconsistent dimensions");
        const double outcome = row.back();
        if (outcome != 0.0 && outcome != 1.0) throw DataError("non-binary outcome");
        x(r, 0) = 1.0;
        for (std::size_t j = 0; j + 1 < width; ++j) {
            if (!std::isfinite(row[j])) throw DataError("non-finite covariate");
            x(r, static_cast<Eigen::Index>(j) + 1) = row[j];
        }
        z[r] = outcome;
    }
    return Dataset(std::move(x), std::move(z));
}

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

double parse_number(std::string_view field, std::size_t line) {
    double value = 0.0;
    const auto* end = field.data() + field.size();
    auto [ptr, ec] = std::from_chars(field.data(), end, value);
    if (ec != std::errc() || ptr != end) throw ParseError("malformed number '" + std::string(field) + "'", line);
    return value;
}

}  // namespace

Dataset read_csv_dataset(std::istream& in) {
    std::string line;
    std::size_t line_no = 0;
    std::size_t width = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto header = split_fields(line);
        if (header.back() != "z") throw ParseError("header must end with the outcome column 'z'", line_no);
        width = header.size();
        break;
    }
    if (width == 0) throw ParseError("missing header row");

    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto fields = split_fields(line);
        if (fields.size() != width) throw ParseError("inconsistent dimensions", line_no);
        std::vector<double> row;
        row.reserve(width);
        for (auto f : fields) row.push_back(parse_number(f, line_no));
        if (row.back() != 0.0 && row.back() != 1.0) throw ParseError("non-binary outcome", line_no);
        for (std::size_t j = 0; j + 1 < width; ++j)
            if (!std::isfinite(row[j])) throw ParseError("non-finite covariate", line_no);
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw ParseError("empty dataset");
    return validate_dataset(rows);
}

Dataset read_csv_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open '" + path + "'");
    return read_csv_dataset(in);
}

void write_csv_dataset(std::ostream& out, const Dataset& data) {
    const auto d = data.dim() - 1;
    for (Eigen::Index j = 1; j <= d; ++j) out << 'x' << j << ',';
    out << "z\n";
    out << std::setprecision(17);
    for (Eigen::Index i = 0; i < data.size(); ++i) {
        for (Eigen::Index j = 1; j <= d; ++j) out << data.covariates()(i, j) << ',';
        out << data.z(i) << '\n';
    }
}

}  // namespace misfit
