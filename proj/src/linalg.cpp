#include "lrgda/linalg.hpp"

#include <cmath>

namespace lrgda {

Matrix symmetrize(const Matrix& a)
{
    return 0.5 * (a + a.transpose());
}

SpdInverse invert_spd(const Matrix& a)
{
    if (a.rows() != a.cols())
        throw InputError("invert_spd: matrix is " + shape_str(a.rows(), a.cols()));
    if (!a.allFinite())
        throw NumericalError("invert_spd: matrix has non-finite entries");

    const Index d = a.rows();
    Eigen::LLT<Matrix> llt(a);
    if (llt.info() == Eigen::Success) {
        const Vector diag = llt.matrixLLT().diagonal();
        if ((diag.array() > 0.0).all()) {
            SpdInverse out;
            out.log_det = 2.0 * diag.array().log().sum();
            out.inverse = symmetrize(llt.solve(Matrix::Identity(d, d)));
            return out;
        }
    }

    Eigen::SelfAdjointEigenSolver<Matrix> eig(a);
    if (eig.info() != Eigen::Success)
        throw NumericalError("invert_spd: eigendecomposition failed");
    const double max_ev = eig.eigenvalues().maxCoeff();
    if (!(max_ev > 0.0) || !std::isfinite(max_ev))
        throw NumericalError("invert_spd: matrix has no positive eigenvalue (max " + std::to_string(max_ev) +
                             ")");
    const double floor = kEigenClip * max_ev;
    Vector ev = eig.eigenvalues().cwiseMax(floor);
    SpdInverse out;
    out.used_fallback = true;
    out.log_det = ev.array().log().sum();
    out.inverse = symmetrize(eig.eigenvectors() * ev.cwiseInverse().asDiagonal() * eig.eigenvectors().transpose());
    return out;
}

double log_det_spd(const Matrix& a)
{
    Eigen::LLT<Matrix> llt(a);
    if (llt.info() != Eigen::Success)
        throw NumericalError("log_det_spd: matrix is not positive definite");
    const Vector diag = llt.matrixLLT().diagonal();
    if (!((diag.array() > 0.0).all()))
        throw NumericalError("log_det_spd: matrix is not positive definite");
    return 2.0 * diag.array().log().sum();
}

void fix_eigenvector_signs(Matrix& vectors)
{
    for (Index j = 0; j < vectors.cols(); ++j) {
        Index arg = 0;
        vectors.col(j).cwiseAbs().maxCoeff(&arg);
        if (vectors(arg, j) < 0.0)
            vectors.col(j) = -vectors.col(j);
    }
}

EigenPairs top_eigenpairs(const Matrix& s, Index r)
{
    const Index d = s.rows();
    if (r < 1 || r > d)
        throw InputError("top_eigenpairs: rank " + std::to_string(r) + " outside [1, " + std::to_string(d) + "]");
    Eigen::SelfAdjointEigenSolver<Matrix> eig(s);
    if (eig.info() != Eigen::Success)
        throw NumericalError("top_eigenpairs: eigendecomposition failed");
    // Eigen returns ascending order.
    EigenPairs out;
    out.values = eig.eigenvalues().tail(r).reverse();
    out.vectors = eig.eigenvectors().rightCols(r).rowwise().reverse();
    out.smallest = eig.eigenvalues()(0);
    fix_eigenvector_signs(out.vectors);
    return out;
}

double min_eigenvalue(const Matrix& s)
{
    Eigen::SelfAdjointEigenSolver<Matrix> eig(s, Eigen::EigenvaluesOnly);
    return eig.eigenvalues().minCoeff();
}

EigenPairs randomized_top_eigenpairs(const Matrix& s, Index r, Index oversample, int power_iterations,
                                     std::uint64_t seed)
{
    const Index d = s.rows();
    if (r < 1 || r > d)
        throw InputError("randomized_top_eigenpairs: rank " + std::to_string(r) + " outside [1, " +
                         std::to_string(d) + "]");
    const Index width = std::min(d, r + std::max<Index>(0, oversample));
    if (width == d)
        return top_eigenpairs(s, r);

    Rng rng(seed);
    Matrix omega = standard_normal(d, width, rng);
    auto orthonormal = [width](const Matrix& y) {
        Eigen::HouseholderQR<Matrix> qr(y);
        return Matrix(qr.householderQ() * Matrix::Identity(y.rows(), width));
    };
    Matrix q = orthonormal(s * omega);
    for (int it = 0; it < power_iterations; ++it)
        q = orthonormal(s * q);

    const Matrix small = symmetrize(q.transpose() * s * q);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(small);
    if (eig.info() != Eigen::Success)
        throw NumericalError("randomized_top_eigenpairs: projected eigendecomposition failed");
    EigenPairs out;
    out.values = eig.eigenvalues().tail(r).reverse();
    out.vectors = q * eig.eigenvectors().rightCols(r).rowwise().reverse();
    out.smallest = eig.eigenvalues()(0);
    fix_eigenvector_signs(out.vectors);
    return out;
}

Matrix psd_sqrt_factor(const Matrix& s)
{
    Eigen::SelfAdjointEigenSolver<Matrix> eig(s);
    if (eig.info() != Eigen::Success)
        throw NumericalError("psd_sqrt_factor: eigendecomposition failed");
    const Vector root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return eig.eigenvectors() * root.asDiagonal();
}

double spectral_norm(const Matrix& a)
{
    if (a.size() == 0)
        return 0.0;
    Eigen::JacobiSVD<Matrix> svd(a);
    return svd.singularValues()(0);
}

} // namespace lrgda
