#pragma once

#include "misfit/model.hpp"

namespace misfit {

/// Owning counterpart of DesignView.
struct WeightedDesign {
    Matrix x;
    Vector y;
    Vector w;

    DesignView view() const { return {x, y, w}; }
};

struct LikelihoodEvaluation {
    double value = 0.0;
    Vector score;
    Matrix neg_hessian;
};

enum class EvalParts { Value, ValueScore, All };

LikelihoodEvaluation evaluate(Link link, const ParamVector& beta, const DesignView& design,
                              EvalParts parts = EvalParts::All);
LikelihoodEvaluation evaluate(Link link, const ParamVector& beta, const Dataset& data,
                              EvalParts parts = EvalParts::All);

/// (1/n) sum_i w_i [z_i log q_i + (1 - z_i) log(1 - q_i)]; w_i = 1 when the
/// dataset is unweighted.
double log_likelihood(Link link, const ParamVector& beta, const Dataset& data);
/// Gradient of log_likelihood.
Vector score(Link link, const ParamVector& beta, const Dataset& data);
/// Negative Hessian of log_likelihood. For the logistic link this is
/// J_n(beta) = (1/n) sum_i w_i x_i x_i^t q_i (1 - q_i).
Matrix information_matrix(Link link, const ParamVector& beta, const Dataset& data);

}  // namespace misfit
