#include "misfit/quadrature.hpp"

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/special_functions/beta.hpp>

#include <algorithm>
#include <cmath>

namespace misfit {

std::string_view to_string(IntegrationBackend backend) {
    switch (backend) {
        case IntegrationBackend::ExactSum: return "exact-sum";
        case IntegrationBackend::GaussLegendre: return "gauss-legendre";
        case IntegrationBackend::QuasiMonteCarlo: return "quasi-monte-carlo";
    }
    return "unknown";
}

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};

struct Rule1d {
    std::vector<double> x;
    std::vector<double> w;
};

// Full symmetric Gauss-Legendre rule on [-1, 1]; boost stores the
// nonnegative half.
template <unsigned N>
Rule1d legendre_reference() {
    using G = boost::math::quadrature::gauss<double, N>;
    Rule1d r;
    const auto& a = G::abscissa();
    const auto& w = G::weights();
    for (std::size_t i = 0; i < a.size(); ++i) {
        r.x.push_back(a[i]);
        r.w.push_back(w[i]);
        if (a[i] != 0.0) {
            r.x.push_back(-a[i]);
            r.w.push_back(w[i]);
        }
    }
    return r;
}

const Rule1d& legendre(int nodes) {
    static const Rule1d fine = legendre_reference<kGaussNodes>();
    static const Rule1d coarse = legendre_reference<kGaussCoarseNodes>();
    return nodes == kGaussNodes ? fine : coarse;
}

// Gauss-Legendre on each panel of [lo, hi] split at the cuts inside it.
Rule1d panels(double lo, double hi, std::vector<double> cuts, int nodes) {
    std::vector<double> edges{lo};
    std::sort(cuts.begin(), cuts.end());
    for (double c : cuts)
        if (c > lo && c < hi && c > edges.back()) edges.push_back(c);
    edges.push_back(hi);
    const Rule1d& ref = legendre(nodes);
    Rule1d out;
    for (std::size_t p = 0; p + 1 < edges.size(); ++p) {
        const double half = 0.5 * (edges[p + 1] - edges[p]);
        const double mid = 0.5 * (edges[p + 1] + edges[p]);
        for (std::size_t i = 0; i < ref.x.size(); ++i) {
            out.x.push_back(mid + half * ref.x[i]);
            out.w.push_back(half * ref.w[i]);
        }
    }
    return out;
}

void normalize(Rule1d& r) {
    double total = 0.0;
    for (double w : r.w) total += w;
    for (double& w : r.w) w /= total;
}

Rule1d marginal_rule(const ProductFamily& family, Eigen::Index k, const std::vector<double>& cuts, int nodes) {
    Rule1d r = std::visit(
        overloaded{
            [&](const ProductUniform& u) { return panels(u.lower[k], u.upper[k], cuts, nodes); },
            [&](const ProductGaussian& g) {
                Rule1d p = panels(g.mean[k] - kGaussianHalfWidth * g.sd[k], g.mean[k] + kGaussianHalfWidth * g.sd[k],
                                  cuts, nodes);
                for (std::size_t i = 0; i < p.x.size(); ++i) {
                    const double z = (p.x[i] - g.mean[k]) / g.sd[k];
                    p.w[i] *= std::exp(-0.5 * z * z);
                }
                return p;
            },
            [&](const ProductBeta& b) {
                // Probability-integral transform: integrate over u = F(x),
                // which absorbs endpoint singularities of the density.
                std::vector<double> ucuts;
                for (double c : cuts)
                    if (c > 0.0 && c < 1.0) ucuts.push_back(boost::math::ibeta(b.a[k], b.b[k], c));
                Rule1d p = panels(0.0, 1.0, ucuts, nodes);
                for (double& u : p.x) u = boost::math::ibeta_inv(b.a[k], b.b[k], u);
                return p;
            },
        },
        family);
    normalize(r);
    return r;
}

QuadratureRule tensor_rule(const ProductFamily& family, const BreakpointFn& breakpoints, int nodes) {
    const Eigen::Index d = dimension(family);
    std::vector<Rule1d> axes;
    Eigen::Index count = 1;
    for (Eigen::Index k = 0; k < d; ++k) {
        axes.push_back(marginal_rule(family, k, breakpoints ? breakpoints(k) : std::vector<double>{}, nodes));
        count *= static_cast<Eigen::Index>(axes.back().x.size());
    }
    QuadratureRule rule{Matrix(count, d), Vector(count)};
    std::vector<std::size_t> idx(static_cast<std::size_t>(d), 0);
    for (Eigen::Index row = 0; row < count; ++row) {
        double w = 1.0;
        for (Eigen::Index k = 0; k < d; ++k) {
            rule.nodes(row, k) = axes[k].x[idx[k]];
            w *= axes[k].w[idx[k]];
        }
        rule.weights[row] = w;
        for (Eigen::Index k = d - 1; k >= 0; --k) {
            if (++idx[k] < axes[k].x.size()) break;
            idx[k] = 0;
        }
    }
    return rule;
}

QuadratureRule qmc_rule(const ProductFamily& family, Eigen::Index count) {
    const Eigen::Index d = dimension(family);
    const Matrix u = halton_points(count, d);
    QuadratureRule rule{Matrix(count, d), Vector::Constant(count, 1.0 / static_cast<double>(count))};
    for (Eigen::Index i = 0; i < count; ++i)
        for (Eigen::Index k = 0; k < d; ++k) rule.nodes(i, k) = marginal_quantile(family, k, u(i, k));
    return rule;
}

QuadratureRule family_rule(const ProductFamily& family, const BreakpointFn& breakpoints, bool fine) {
    if (dimension(family) <= kMaxTensorDimension)
        return tensor_rule(family, breakpoints, fine ? kGaussNodes : kGaussCoarseNodes);
    const Eigen::Index points = Eigen::Index{1} << kQmcLog2Points;
    return qmc_rule(family, fine ? points : points / 2);
}

QuadratureRule concat(const QuadratureRule& a, double wa, const QuadratureRule& b, double wb) {
    QuadratureRule out{Matrix(a.nodes.rows() + b.nodes.rows(), a.nodes.cols()),
                       Vector(a.weights.size() + b.weights.size())};
    out.nodes << a.nodes, b.nodes;
    out.weights << wa * a.weights, wb * b.weights;
    return out;
}

}  // namespace

QuadratureRule finite_support_rule(const FiniteSupport& support) {
    const auto m = static_cast<Eigen::Index>(support.points.size());
    QuadratureRule rule{Matrix(m, support.points.front().size()), Vector(m)};
    for (Eigen::Index i = 0; i < m; ++i) {
        rule.nodes.row(i) = support.points[static_cast<std::size_t>(i)].transpose();
        rule.weights[i] = support.probabilities[static_cast<std::size_t>(i)];
    }
    return rule;
}

Matrix halton_points(Eigen::Index count, Eigen::Index dim) {
    static constexpr int kPrimes[] = {2,  3,  5,  7,  11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53,
                                      59, 61, 67, 71, 73, 79, 83, 89, 97, 101, 103, 107, 109, 113, 127, 131};
    if (dim > static_cast<Eigen::Index>(std::size(kPrimes))) throw OracleError("quasi-Monte Carlo supports d <= 32");
    Matrix out(count, dim);
    for (Eigen::Index k = 0; k < dim; ++k) {
        const int base = kPrimes[k];
        for (Eigen::Index i = 0; i < count; ++i) {
            double f = 1.0;
            double r = 0.0;
            for (auto n = static_cast<std::uint64_t>(i + 1); n > 0; n /= static_cast<std::uint64_t>(base)) {
                f /= base;
                r += f * static_cast<double>(n % static_cast<std::uint64_t>(base));
            }
            out(i, k) = r;
        }
    }
    return out;
}

IntegrationPlan make_integration_plan(const CovariateDistribution& H, const BreakpointFn& breakpoints) {
    IntegrationPlan plan;
    const bool tensor = H.dimension() <= kMaxTensorDimension;
    std::visit(overloaded{
                   [&](const FiniteSupport& f) {
                       plan.backend = IntegrationBackend::ExactSum;
                       plan.fine = finite_support_rule(f);
                       plan.coarse = plan.fine;
                   },
                   [&](const TwoClassMixture& m) {
                       plan.backend = tensor ? IntegrationBackend::GaussLegendre : IntegrationBackend::QuasiMonteCarlo;
                       plan.fine = concat(family_rule(m.f0, breakpoints, true), m.pi0,
                                          family_rule(m.f1, breakpoints, true), m.pi1);
                       plan.coarse = concat(family_rule(m.f0, breakpoints, false), m.pi0,
                                            family_rule(m.f1, breakpoints, false), m.pi1);
                   },
                   [&](const auto& family) {
                       plan.backend = tensor ? IntegrationBackend::GaussLegendre : IntegrationBackend::QuasiMonteCarlo;
                       plan.fine = family_rule(ProductFamily(family), breakpoints, true);
                       plan.coarse = family_rule(ProductFamily(family), breakpoints, false);
                   },
               },
               H.kind());
    return plan;
}

}  // namespace misfit
