#include "misfit/kernels.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace misfit {

std::string_view to_string(KernelKind kind) {
    switch (kind) {
        case KernelKind::Gaussian: return "gaussian";
        case KernelKind::Epanechnikov: return "epanechnikov";
        case KernelKind::Uniform: return "uniform";
    }
    return "unknown";
}

KernelKind parse_kernel(std::string_view name) {
    if (name == "gaussian") return KernelKind::Gaussian;
    if (name == "epanechnikov") return KernelKind::Epanechnikov;
    if (name == "uniform") return KernelKind::Uniform;
    throw ParseError("unknown kernel '" + std::string(name) + "'");
}

double kernel_profile(KernelKind kind, double u) {
    switch (kind) {
        case KernelKind::Gaussian: return std::exp(-0.5 * u * u);
        case KernelKind::Epanechnikov: return std::abs(u) <= 1.0 ? 1.0 - u * u : 0.0;
        case KernelKind::Uniform: return std::abs(u) <= 1.0 ? 1.0 : 0.0;
    }
    return 0.0;
}

double kernel_density(KernelKind kind, double u) {
    switch (kind) {
        case KernelKind::Gaussian: return kernel_profile(kind, u) / std::sqrt(2.0 * std::numbers::pi);
        case KernelKind::Epanechnikov: return 0.75 * kernel_profile(kind, u);
        case KernelKind::Uniform: return 0.5 * kernel_profile(kind, u);
    }
    return 0.0;
}

void KernelSpec::validate(Eigen::Index features) const {
    if (bandwidth.size() != features)
        throw DimensionError("kernel needs one bandwidth per covariate (" + std::to_string(features) + ")");
    for (Eigen::Index k = 0; k < bandwidth.size(); ++k)
        if (!(bandwidth[k] > 0.0) || !std::isfinite(bandwidth[k])) throw DataError("bandwidths must be positive");
}

double kernel_weight(const KernelSpec& spec, const Vector& center, const Vector& features) {
    if (center.size() != features.size() || spec.bandwidth.size() != features.size())
        throw DimensionError("kernel center, bandwidth and point differ in dimension");
    double w = 1.0;
    for (Eigen::Index k = 0; k < features.size() && w > 0.0; ++k)
        w *= kernel_profile(spec.kernel, (center[k] - features[k]) / spec.bandwidth[k]);
    return w;
}

// ---- WeightSpec ------------------------------------------------------------

WeightSpec WeightSpec::indicator(Eigen::Index feature, double lower, double upper) {
    if (feature < 0) throw DimensionError("indicator weight feature index must be nonnegative");
    if (!(lower < upper)) throw DataError("indicator weight needs lower < upper");
    WeightSpec w;
    w.kind_ = Indicator{feature, lower, upper};
    return w;
}

WeightSpec WeightSpec::kernel(Vector center, KernelSpec spec) {
    spec.validate(center.size());
    WeightSpec w;
    w.kind_ = Kernel{std::move(center), std::move(spec)};
    return w;
}

double WeightSpec::operator()(const Vector& features) const {
    return std::visit(
        [&](const auto& k) -> double {
            using K = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<K, Unit>) {
                return 1.0;
            } else if constexpr (std::is_same_v<K, Indicator>) {
                if (k.feature >= features.size()) throw DimensionError("indicator weight feature out of range");
                const double v = features[k.feature];
                return (v >= k.lower && v < k.upper) ? 1.0 : 0.0;
            } else {
                return kernel_weight(k.spec, k.center, features);
            }
        },
        kind_);
}

std::vector<double> WeightSpec::breakpoints(Eigen::Index feature) const {
    std::vector<double> out;
    if (const auto* ind = std::get_if<Indicator>(&kind_); ind && ind->feature == feature) {
        if (std::isfinite(ind->lower)) out.push_back(ind->lower);
        if (std::isfinite(ind->upper)) out.push_back(ind->upper);
    } else if (const auto* ker = std::get_if<Kernel>(&kind_); ker && ker->spec.kernel != KernelKind::Gaussian) {
        const double c = ker->center[feature];
        const double h = ker->spec.bandwidth[feature];
        out = {c - h, c + h};
    }
    return out;
}

std::string WeightSpec::describe() const {
    std::ostringstream out;
    std::visit(
        [&](const auto& k) {
            using K = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<K, Unit>) {
                out << "unit";
            } else if constexpr (std::is_same_v<K, Indicator>) {
                out << "indicator(x" << k.feature + 1 << " in [" << k.lower << ", " << k.upper << "))";
            } else {
                out << "kernel(" << to_string(k.spec.kernel) << ", center=" << k.center.transpose()
                    << ", h=" << k.spec.bandwidth.transpose() << ")";
            }
        },
        kind_);
    return out.str();
}

Vector weights_for(const WeightSpec& weight, const Dataset& data) {
    Vector w(data.size());
    const Eigen::Index d = data.dim() - 1;
    for (Eigen::Index i = 0; i < data.size(); ++i) {
        const Vector features = data.covariates().row(i).tail(d).transpose();
        w[i] = data.case_weights()[i] * weight(features);
    }
    return w;
}

}  // namespace misfit
