#include "misfit/linalg.hpp"

#include <cmath>
#include <sstream>

namespace misfit {

SpdFactor::SpdFactor(const Matrix& a, double max_condition) {
    if (a.rows() != a.cols() || a.rows() == 0) throw DimensionError("SpdFactor needs a non-empty square matrix");
    if (!a.allFinite()) throw SingularMatrixError("matrix has non-finite entries");
    Eigen::SelfAdjointEigenSolver<Matrix> eig(a, Eigen::EigenvaluesOnly);
    const double lo = eig.eigenvalues().minCoeff();
    const double hi = eig.eigenvalues().maxCoeff();
    condition_ = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
    if (!(lo > 0.0) || condition_ > max_condition) {
        std::ostringstream msg;
        msg << "matrix is singular or ill-conditioned (condition number " << condition_ << ")";
        throw SingularMatrixError(msg.str());
    }
    llt_.compute(a);
    if (llt_.info() != Eigen::Success) throw SingularMatrixError("Cholesky factorization failed");
}

Matrix SpdFactor::inverse() const {
    const auto p = llt_.matrixLLT().rows();
    return symmetrize(llt_.solve(Matrix::Identity(p, p)));
}

Matrix symmetrize(const Matrix& a) { return 0.5 * (a + a.transpose()); }

Vector vech(const Matrix& a) {
    const auto p = a.rows();
    Vector out(p * (p + 1) / 2);
    Eigen::Index k = 0;
    for (Eigen::Index j = 0; j < p; ++j)
        for (Eigen::Index i = j; i < p; ++i) out[k++] = a(i, j);
    return out;
}

}  // namespace misfit
