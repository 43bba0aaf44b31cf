#pragma once

#include "misfit/model.hpp"

#include <limits>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace misfit {

enum class KernelKind { Gaussian, Epanechnikov, Uniform };

std::string_view to_string(KernelKind kind);
KernelKind parse_kernel(std::string_view name);

/// Kernel scaled to peak 1 at u = 0: exp(-u^2/2), 1 - u^2, or 1{|u| <= 1}.
/// Used for case weights, where sum_i K counts the cases near a point.
double kernel_profile(KernelKind kind, double u);

/// Kernel scaled to integrate to 1 over the real line.
double kernel_density(KernelKind kind, double u);

/// Product kernel with one bandwidth per covariate (intercept excluded).
struct KernelSpec {
    KernelKind kernel = KernelKind::Gaussian;
    Vector bandwidth;

    /// Throws unless there are `features` bandwidths, all positive and finite.
    void validate(Eigen::Index features) const;
};

/// prod_k K((center_k - x_k) / h_k) with the peak-1 profile.
double kernel_weight(const KernelSpec& spec, const Vector& center, const Vector& features);

/// Weight function w(x) for weighted likelihoods and weighted distances.
class WeightSpec {
public:
    struct Unit {};
    /// One when lower <= x_feature < upper, zero otherwise.
    struct Indicator {
        Eigen::Index feature = 0;
        double lower = -std::numeric_limits<double>::infinity();
        double upper = std::numeric_limits<double>::infinity();
    };
    struct Kernel {
        Vector center;
        KernelSpec spec;
    };

    WeightSpec() = default;
    static WeightSpec unit() { return WeightSpec(); }
    static WeightSpec indicator(Eigen::Index feature, double lower, double upper);
    static WeightSpec kernel(Vector center, KernelSpec spec);

    bool is_unit() const noexcept { return std::holds_alternative<Unit>(kind_); }
    /// Evaluates w at the d raw features.
    double operator()(const Vector& features) const;
    /// Points along `feature` where w is discontinuous.
    std::vector<double> breakpoints(Eigen::Index feature) const;
    std::string describe() const;

    const std::variant<Unit, Indicator, Kernel>& kind() const noexcept { return kind_; }

private:
    std::variant<Unit, Indicator, Kernel> kind_ = Unit{};
};

/// Per-case weights w(x_i) times any weights already on the dataset.
Vector weights_for(const WeightSpec& weight, const Dataset& data);

}  // namespace misfit
