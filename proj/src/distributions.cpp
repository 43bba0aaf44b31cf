#include "misfit/distributions.hpp"

#include "misfit/model.hpp"

#include <boost/math/special_functions/beta.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

namespace misfit {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};

constexpr double kProbabilitySumTolerance = 1e-12;

void require(bool condition, const std::string& message) {
    if (!condition) throw DataError(message);
}

double beta_draw(double a, double b, CounterRng& rng) {
    std::gamma_distribution<double> ga(a, 1.0);
    std::gamma_distribution<double> gb(b, 1.0);
    const double x = ga(rng);
    const double y = gb(rng);
    return x / (x + y);
}

std::string vec_str(const Vector& v) {
    std::ostringstream out;
    out << '(';
    for (Eigen::Index i = 0; i < v.size(); ++i) out << (i ? ", " : "") << v[i];
    out << ')';
    return out.str();
}

std::string family_str(const ProductFamily& family) {
    return std::visit(overloaded{
                          [](const ProductUniform& u) { return "uniform" + vec_str(u.lower) + "-" + vec_str(u.upper); },
                          [](const ProductGaussian& g) { return "gaussian(mean=" + vec_str(g.mean) + ", sd=" + vec_str(g.sd) + ")"; },
                          [](const ProductBeta& b) { return "beta(a=" + vec_str(b.a) + ", b=" + vec_str(b.b) + ")"; },
                      },
                      family);
}

}  // namespace

// ---- Product families ----------------------------------------------------------

Eigen::Index dimension(const ProductFamily& family) {
    return std::visit(overloaded{
                          [](const ProductUniform& u) { return u.lower.size(); },
                          [](const ProductGaussian& g) { return g.mean.size(); },
                          [](const ProductBeta& b) { return b.a.size(); },
                      },
                      family);
}

void validate(const ProductFamily& family) {
    std::visit(overloaded{
                   [](const ProductUniform& u) {
                       require(u.lower.size() == u.upper.size() && u.lower.size() > 0, "uniform bounds must pair up");
                       for (Eigen::Index k = 0; k < u.lower.size(); ++k)
                           require(std::isfinite(u.lower[k]) && std::isfinite(u.upper[k]) && u.lower[k] < u.upper[k],
                                   "uniform bounds must be finite with lower < upper");
                   },
                   [](const ProductGaussian& g) {
                       require(g.mean.size() == g.sd.size() && g.mean.size() > 0, "gaussian mean and sd must pair up");
                       for (Eigen::Index k = 0; k < g.sd.size(); ++k)
                           require(std::isfinite(g.mean[k]) && g.sd[k] > 0.0 && std::isfinite(g.sd[k]),
                                   "gaussian sd must be positive");
                   },
                   [](const ProductBeta& b) {
                       require(b.a.size() == b.b.size() && b.a.size() > 0, "beta shapes must pair up");
                       for (Eigen::Index k = 0; k < b.a.size(); ++k)
                           require(b.a[k] > 0.0 && b.b[k] > 0.0 && std::isfinite(b.a[k]) && std::isfinite(b.b[k]),
                                   "beta shapes must be positive");
                   },
               },
               family);
}

Vector sample(const ProductFamily& family, CounterRng& rng) {
    return std::visit(overloaded{
                          [&](const ProductUniform& u) {
                              Vector x(u.lower.size());
                              for (Eigen::Index k = 0; k < x.size(); ++k)
                                  x[k] = u.lower[k] + (u.upper[k] - u.lower[k]) * rng.uniform();
                              return x;
                          },
                          [&](const ProductGaussian& g) {
                              Vector x(g.mean.size());
                              std::normal_distribution<double> normal;
                              for (Eigen::Index k = 0; k < x.size(); ++k) x[k] = g.mean[k] + g.sd[k] * normal(rng);
                              return x;
                          },
                          [&](const ProductBeta& b) {
                              Vector x(b.a.size());
                              for (Eigen::Index k = 0; k < x.size(); ++k) x[k] = beta_draw(b.a[k], b.b[k], rng);
                              return x;
                          },
                      },
                      family);
}

double log_density(const ProductFamily& family, const Vector& x) {
    constexpr double kNegInf = -std::numeric_limits<double>::infinity();
    if (x.size() != dimension(family)) throw DimensionError("point and family differ in dimension");
    return std::visit(overloaded{
                          [&](const ProductUniform& u) {
                              double s = 0.0;
                              for (Eigen::Index k = 0; k < x.size(); ++k) {
                                  if (x[k] < u.lower[k] || x[k] > u.upper[k]) return kNegInf;
                                  s -= std::log(u.upper[k] - u.lower[k]);
                              }
                              return s;
                          },
                          [&](const ProductGaussian& g) {
                              double s = 0.0;
                              for (Eigen::Index k = 0; k < x.size(); ++k) {
                                  const double z = (x[k] - g.mean[k]) / g.sd[k];
                                  s += -0.5 * z * z - std::log(g.sd[k]) - 0.5 * std::log(2.0 * std::numbers::pi);
                              }
                              return s;
                          },
                          [&](const ProductBeta& b) {
                              double s = 0.0;
                              for (Eigen::Index k = 0; k < x.size(); ++k) {
                                  if (x[k] <= 0.0 || x[k] >= 1.0) return kNegInf;
                                  s += (b.a[k] - 1.0) * std::log(x[k]) + (b.b[k] - 1.0) * std::log1p(-x[k]) -
                                       (std::lgamma(b.a[k]) + std::lgamma(b.b[k]) - std::lgamma(b.a[k] + b.b[k]));
                              }
                              return s;
                          },
                      },
                      family);
}

double marginal_quantile(const ProductFamily& family, Eigen::Index k, double u) {
    return std::visit(overloaded{
                          [&](const ProductUniform& f) { return f.lower[k] + (f.upper[k] - f.lower[k]) * u; },
                          [&](const ProductGaussian& f) { return f.mean[k] + f.sd[k] * normal_quantile(u); },
                          [&](const ProductBeta& f) { return boost::math::ibeta_inv(f.a[k], f.b[k], u); },
                      },
                      family);
}

// ---- CovariateDistribution ------------------------------------------------------

CovariateDistribution::CovariateDistribution(Kind kind) : kind_(std::move(kind)) {
    std::visit(overloaded{
                   [&](const FiniteSupport& f) {
                       require(!f.points.empty(), "finite support needs at least one point");
                       require(f.points.size() == f.probabilities.size(), "one probability per support point");
                       dim_ = f.points.front().size();
                       double total = 0.0;
                       for (std::size_t i = 0; i < f.points.size(); ++i) {
                           require(f.points[i].size() == dim_, "support points differ in dimension");
                           require(f.points[i].allFinite(), "support points must be finite");
                           require(f.probabilities[i] >= 0.0, "probabilities must be nonnegative");
                           total += f.probabilities[i];
                       }
                       require(std::abs(total - 1.0) <= kProbabilitySumTolerance, "probabilities must sum to 1");
                   },
                   [&](const TwoClassMixture& m) {
                       require(m.pi0 > 0.0 && m.pi1 > 0.0, "class priors must be positive");
                       require(std::abs(m.pi0 + m.pi1 - 1.0) <= kProbabilitySumTolerance, "class priors must sum to 1");
                       validate(m.f0);
                       validate(m.f1);
                       require(misfit::dimension(m.f0) == misfit::dimension(m.f1), "class densities differ in dimension");
                       dim_ = misfit::dimension(m.f0);
                   },
                   [&](const auto& family) {
                       validate(ProductFamily(family));
                       dim_ = misfit::dimension(ProductFamily(family));
                   },
               },
               kind_);
}

Vector CovariateDistribution::sample(CounterRng& rng) const {
    return std::visit(overloaded{
                          [&](const FiniteSupport& f) {
                              const double u = rng.uniform();
                              double cum = 0.0;
                              for (std::size_t i = 0; i < f.points.size(); ++i) {
                                  cum += f.probabilities[i];
                                  if (u < cum) return f.points[i];
                              }
                              return f.points.back();
                          },
                          [&](const TwoClassMixture& m) {
                              return rng.uniform() < m.pi1 ? misfit::sample(m.f1, rng) : misfit::sample(m.f0, rng);
                          },
                          [&](const auto& family) { return misfit::sample(ProductFamily(family), rng); },
                      },
                      kind_);
}

std::string CovariateDistribution::describe() const {
    return std::visit(overloaded{
                          [](const FiniteSupport& f) {
                              std::ostringstream out;
                              out << "finite{";
                              for (std::size_t i = 0; i < f.points.size(); ++i)
                                  out << (i ? ", " : "") << vec_str(f.points[i]) << ":" << f.probabilities[i];
                              out << '}';
                              return out.str();
                          },
                          [](const TwoClassMixture& m) {
                              std::ostringstream out;
                              out << "mixture(pi0=" << m.pi0 << ", f0=" << family_str(m.f0) << ", pi1=" << m.pi1
                                  << ", f1=" << family_str(m.f1) << ")";
                              return out.str();
                          },
                          [](const auto& family) { return family_str(ProductFamily(family)); },
                      },
                      kind_);
}

// ---- TrueModel ------------------------------------------------------------------

Vector apply_feature_map(FeatureMap map, const Vector& x) {
    if (map == FeatureMap::Identity) return x;
    Vector out(2 * x.size());
    for (Eigen::Index k = 0; k < x.size(); ++k) {
        out[2 * k] = std::log(x[k]);
        out[2 * k + 1] = std::log1p(-x[k]);
    }
    return out;
}

namespace {

std::size_t piece_index(const std::vector<double>& thresholds, double v) {
    return static_cast<std::size_t>(std::upper_bound(thresholds.begin(), thresholds.end(), v) - thresholds.begin());
}

void check_thresholds(const std::vector<double>& t) {
    require(std::is_sorted(t.begin(), t.end()) && std::adjacent_find(t.begin(), t.end()) == t.end(),
            "thresholds must be strictly increasing");
}

}  // namespace

TrueModel::TrueModel(Kind kind) : kind_(std::move(kind)) {
    std::visit(overloaded{
                   [](const LogisticInFeatures& l) { require(l.beta.size() >= 1 && l.beta.allFinite(), "truth beta must be finite"); },
                   [](const StepFunction& s) {
                       check_thresholds(s.thresholds);
                       require(s.values.size() == s.thresholds.size() + 1, "step function needs one value per piece");
                       for (double v : s.values) require(v >= 0.0 && v <= 1.0, "step values must lie in [0, 1]");
                   },
                   [](const PiecewiseLogistic& p) {
                       check_thresholds(p.thresholds);
                       require(p.betas.size() == p.thresholds.size() + 1, "piecewise logistic needs one beta per piece");
                       for (const auto& b : p.betas)
                           require(b.size() == p.betas.front().size() && b.allFinite(), "piece betas must agree in size");
                   },
                   [](const MixtureRatio& m) { CovariateDistribution check{m.mixture}; },
                   [](const Tabulated& t) {
                       require(t.x.size() >= 2 && t.x.size() == t.q.size(), "table needs >= 2 (x, q) pairs");
                       check_thresholds(t.x);
                       for (double v : t.q) require(v >= 0.0 && v <= 1.0, "tabulated q must lie in [0, 1]");
                   },
                   [](const CallableTruth& c) { require(static_cast<bool>(c.q), "callable truth is empty"); },
               },
               kind_);
}

double TrueModel::probability(const Vector& x) const {
    return std::visit(overloaded{
                          [&](const LogisticInFeatures& l) {
                              const Vector phi = apply_feature_map(l.features, x);
                              if (phi.size() + 1 != l.beta.size()) throw DimensionError("truth beta and x differ in dimension");
                              return link_mean(Link::Logistic, l.beta[0] + l.beta.tail(phi.size()).dot(phi));
                          },
                          [&](const StepFunction& s) { return s.values[piece_index(s.thresholds, x[s.feature])]; },
                          [&](const PiecewiseLogistic& p) {
                              const Vector& b = p.betas[piece_index(p.thresholds, x[p.feature])];
                              if (b.size() != x.size() + 1) throw DimensionError("piece beta and x differ in dimension");
                              return link_mean(Link::Logistic, b[0] + b.tail(x.size()).dot(x));
                          },
                          [&](const MixtureRatio& m) {
                              const double l1 = std::log(m.mixture.pi1) + log_density(m.mixture.f1, x);
                              const double l0 = std::log(m.mixture.pi0) + log_density(m.mixture.f0, x);
                              if (std::isinf(l0) && std::isinf(l1)) return m.mixture.pi1;
                              if (std::isinf(l0)) return 1.0;
                              if (std::isinf(l1)) return 0.0;
                              return link_mean(Link::Logistic, l1 - l0);
                          },
                          [&](const Tabulated& t) {
                              const double v = x[0];
                              if (v <= t.x.front()) return t.q.front();
                              if (v >= t.x.back()) return t.q.back();
                              const auto k = piece_index(t.x, v);
                              const double s = (v - t.x[k - 1]) / (t.x[k] - t.x[k - 1]);
                              return (1.0 - s) * t.q[k - 1] + s * t.q[k];
                          },
                          [&](const CallableTruth& c) {
                              const double q = c.q(x);
                              if (!(q >= 0.0 && q <= 1.0)) throw DataError("callable truth returned q outside [0, 1]");
                              return q;
                          },
                      },
                      kind_);
}

std::vector<double> TrueModel::breakpoints(Eigen::Index feature) const {
    return std::visit(overloaded{
                          [&](const StepFunction& s) { return s.feature == feature ? s.thresholds : std::vector<double>{}; },
                          [&](const PiecewiseLogistic& p) { return p.feature == feature ? p.thresholds : std::vector<double>{}; },
                          [&](const Tabulated& t) { return feature == 0 ? t.x : std::vector<double>{}; },
                          [&](const CallableTruth& c) {
                              return static_cast<std::size_t>(feature) < c.breakpoints.size() ? c.breakpoints[feature]
                                                                                             : std::vector<double>{};
                          },
                          [](const auto&) { return std::vector<double>{}; },
                      },
                      kind_);
}

void TrueModel::check_dimension(Eigen::Index d) const {
    std::visit(overloaded{
                   [&](const LogisticInFeatures& l) {
                       const Eigen::Index expected = 1 + (l.features == FeatureMap::Identity ? d : 2 * d);
                       if (l.beta.size() != expected) throw DimensionError("truth beta does not match the covariate dimension");
                   },
                   [&](const StepFunction& s) {
                       if (s.feature < 0 || s.feature >= d) throw DimensionError("step function feature out of range");
                   },
                   [&](const PiecewiseLogistic& p) {
                       if (p.feature < 0 || p.feature >= d || p.betas.front().size() != d + 1)
                           throw DimensionError("piecewise logistic does not match the covariate dimension");
                   },
                   [&](const MixtureRatio& m) {
                       if (dimension(m.mixture.f0) != d) throw DimensionError("mixture truth does not match the covariate dimension");
                   },
                   [&](const Tabulated&) {
                       if (d != 1) throw DimensionError("tabulated truth is one-dimensional");
                   },
                   [](const CallableTruth&) {},
               },
               kind_);
}

std::string TrueModel::describe() const {
    return std::visit(overloaded{
                          [](const LogisticInFeatures& l) {
                              return std::string("logistic(beta=") + vec_str(l.beta) +
                                     (l.features == FeatureMap::BetaLog ? ", features=beta-log)" : ")");
                          },
                          [](const StepFunction& s) {
                              std::ostringstream out;
                              out << "step(x" << s.feature + 1 << ", thresholds=" << vec_str(Eigen::Map<const Vector>(s.thresholds.data(), static_cast<Eigen::Index>(s.thresholds.size())))
                                  << ", values=" << vec_str(Eigen::Map<const Vector>(s.values.data(), static_cast<Eigen::Index>(s.values.size()))) << ")";
                              return out.str();
                          },
                          [](const PiecewiseLogistic& p) {
                              std::ostringstream out;
                              out << "piecewise-logistic(x" << p.feature + 1 << ", pieces=" << p.betas.size() << ")";
                              return out.str();
                          },
                          [](const MixtureRatio&) { return std::string("mixture-ratio"); },
                          [](const Tabulated& t) { return "tabulated(" + std::to_string(t.x.size()) + " knots)"; },
                          [](const CallableTruth&) { return std::string("callable"); },
                      },
                      kind_);
}

}  // namespace misfit
