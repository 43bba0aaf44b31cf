#pragma once

#include "misfit/types.hpp"

namespace misfit {

inline constexpr double kMaxConditionNumber = 1e12;

/// Cholesky factorization of a symmetric positive-definite matrix, guarded
/// by an explicit condition-number check. Throws SingularMatrixError when the
/// matrix is not positive definite or its condition number exceeds the limit.
class SpdFactor {
public:
    explicit SpdFactor(const Matrix& a, double max_condition = kMaxConditionNumber);

    Vector solve(const Vector& b) const { return llt_.solve(b); }
    Matrix solve(const Matrix& b) const { return llt_.solve(b); }
    Matrix inverse() const;
    double condition_number() const noexcept { return condition_; }
    /// Lower Cholesky factor L with A = L L^t.
    Matrix lower() const { return llt_.matrixL(); }

private:
    Eigen::LLT<Matrix> llt_;
    double condition_ = 0.0;
};

/// Forces exact symmetry by averaging with the transpose.
Matrix symmetrize(const Matrix& a);

/// Half-vectorization: the lower triangle stacked column by column.
Vector vech(const Matrix& a);

}  // namespace misfit
