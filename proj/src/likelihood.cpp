#include "misfit/likelihood.hpp"

#include "misfit/summation.hpp"

namespace misfit {

namespace {

struct Accumulator {
    double value = 0.0;
    Vector score;
    Matrix hess;  // lower triangle only until finalized

    Accumulator& operator+=(const Accumulator& other) {
        value += other.value;
        if (score.size()) score += other.score;
        if (hess.size()) hess += other.hess;
        return *this;
    }
};

}  // namespace

LikelihoodEvaluation evaluate(Link link, const ParamVector& beta, const DesignView& design, EvalParts parts) {
    const Eigen::Index p = design.x.cols();
    if (beta.size() != p) throw DimensionError("beta has dimension " + std::to_string(beta.size()) +
                                               ", design has " + std::to_string(p));
    const bool want_score = parts != EvalParts::Value;
    const bool want_hess = parts == EvalParts::All;

    auto leaf = [&](std::size_t begin, std::size_t end) {
        Accumulator acc;
        if (want_score) acc.score = Vector::Zero(p);
        if (want_hess) acc.hess = Matrix::Zero(p, p);
        for (std::size_t k = begin; k < end; ++k) {
            const auto i = static_cast<Eigen::Index>(k);
            const double w = design.w[i];
            if (w == 0.0) continue;
            const auto row = design.x.row(i);
            const CaseTerms terms = case_terms(link, row.dot(beta), design.y[i]);
            acc.value += w * terms.log_lik;
            if (want_score) acc.score.noalias() += (w * terms.slope) * row.transpose();
            if (want_hess) acc.hess.selfadjointView<Eigen::Lower>().rankUpdate(row.transpose(), w * terms.curvature);
        }
        return acc;
    };

    Accumulator total = pairwise_sum<Accumulator>(0, static_cast<std::size_t>(design.x.rows()), leaf);

    LikelihoodEvaluation out;
    out.value = total.value;
    if (want_score) out.score = std::move(total.score);
    if (want_hess) {
        out.neg_hessian = total.hess.selfadjointView<Eigen::Lower>();
    }
    return out;
}

LikelihoodEvaluation evaluate(Link link, const ParamVector& beta, const Dataset& data, EvalParts parts) {
    return evaluate(link, beta, data.design(), parts);
}

double log_likelihood(Link link, const ParamVector& beta, const Dataset& data) {
    return evaluate(link, beta, data, EvalParts::Value).value;
}

Vector score(Link link, const ParamVector& beta, const Dataset& data) {
    return evaluate(link, beta, data, EvalParts::ValueScore).score;
}

Matrix information_matrix(Link link, const ParamVector& beta, const Dataset& data) {
    return evaluate(link, beta, data, EvalParts::All).neg_hessian;
}

}  // namespace misfit
