#pragma once

// Shared fixtures and independent dense oracles for the unit tests.

#include "lrgda/rng.hpp"
#include "lrgda/stats.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <vector>

namespace testing {

using namespace lrgda;

inline Matrix random_spd(Index d, Rng& rng, double floor = 0.5)
{
    const Matrix a = standard_normal(d, d, rng);
    Matrix s = a * a.transpose() / static_cast<double>(d);
    s.diagonal().array() += floor;
    return s;
}

inline Matrix random_psd_rank(Index d, Index r, Rng& rng)
{
    const Matrix a = standard_normal(d, r, rng);
    return a * a.transpose();
}

/// Inverse through LU, independent of the Cholesky paths in the library.
inline Matrix dense_inverse(const Matrix& a)
{
    return a.partialPivLu().inverse();
}

/// log det from the eigenvalues of a symmetric matrix.
inline double dense_log_det(const Matrix& a)
{
    Eigen::SelfAdjointEigenSolver<Matrix> es(a, Eigen::EigenvaluesOnly);
    return es.eigenvalues().array().log().sum();
}

/// Biased mean and covariance of stacked rows, computed directly.
inline std::pair<Vector, Matrix> dense_moments(const RowMatrix& x)
{
    const double n = static_cast<double>(x.rows());
    const Vector mu = x.colwise().sum().transpose() / n;
    const Matrix sigma = Matrix(x.transpose()) * x / n - mu * mu.transpose();
    return {mu, sigma};
}

inline double max_abs(const Matrix& a)
{
    return a.cwiseAbs().maxCoeff();
}

/// Gaussian draws with the given mean and covariance, via an LLT factor.
inline RowMatrix gaussian_rows(Index n, const Vector& mu, const Matrix& sigma, Rng& rng)
{
    const Matrix l = sigma.llt().matrixL();
    RowMatrix z = standard_normal(n, mu.size(), rng);
    RowMatrix out = z * l.transpose();
    out.rowwise() += mu.transpose();
    return out;
}

/// Labeled samples of C random Gaussian classes with distinct covariances.
struct Mixture {
    std::vector<Vector> mu;
    std::vector<Matrix> sigma;
    FeatureMatrix train;
};

inline Mixture random_mixture(std::size_t classes, Index d, Index per_class, std::uint64_t seed, double spread = 3.0)
{
    Rng rng = make_rng(seed, "test-mixture");
    Mixture m;
    RowMatrix x(static_cast<Index>(classes) * per_class, d);
    std::vector<ClassId> y;
    for (std::size_t c = 0; c < classes; ++c) {
        m.mu.push_back(spread * standard_normal(d, 1, rng).col(0));
        m.sigma.push_back(random_spd(d, rng));
        x.middleRows(static_cast<Index>(c) * per_class, per_class) = gaussian_rows(per_class, m.mu[c], m.sigma[c], rng);
        y.insert(y.end(), static_cast<std::size_t>(per_class), static_cast<ClassId>(c));
    }
    m.train = FeatureMatrix(std::move(x), std::move(y));
    return m;
}

inline StatsRegistry registry_of(const FeatureMatrix& fm)
{
    StatsRegistry reg(fm.cols());
    reg.accumulate(fm);
    return reg;
}

} // namespace testing
