#pragma once

#include "lrgda/rng.hpp"
#include "lrgda/types.hpp"

namespace lrgda {

/// Relative eigenvalue floor used by the SVD-style fallback inversion.
inline constexpr double kEigenClip = 1e-10;

/// (A + A^T) / 2
Matrix symmetrize(const Matrix& a);

struct SpdInverse {
    Matrix inverse;
    double log_det = 0.0;
    bool used_fallback = false;
};

/**
 * Invert a symmetric positive definite matrix.
 *
 * Cholesky first; log det = 2 * sum(log diag(L)). If the factorization fails
 * the matrix is eigendecomposed and eigenvalues below kEigenClip * max are
 * raised to that floor before inversion. Throws NumericalError when even the
 * fallback has nothing to work with (largest eigenvalue <= 0 or non-finite
 * entries).
 */
SpdInverse invert_spd(const Matrix& a);

/// log det of an SPD matrix via Cholesky. Throws NumericalError if not PD.
double log_det_spd(const Matrix& a);

/// Eigenpairs sorted by descending eigenvalue; columns of `vectors` match `values`.
struct EigenPairs {
    Vector values;
    Matrix vectors;
    /// Smallest eigenvalue seen by the solver (full spectrum, or the projected one when randomized).
    double smallest = 0.0;
};

/// Flip each column so that its largest-magnitude entry is positive.
void fix_eigenvector_signs(Matrix& vectors);

/// Top-r eigenpairs of a symmetric matrix from a full eigendecomposition.
EigenPairs top_eigenpairs(const Matrix& s, Index r);

/// Smallest eigenvalue of the full spectrum (used for PSD checks).
double min_eigenvalue(const Matrix& s);

/**
 * Top-r eigenpairs of a symmetric PSD matrix by randomized range finding.
 *
 * Sketch width r + oversample (capped at d), `power_iterations` rounds of
 * subspace iteration with re-orthonormalization, then an exact eigensolve of
 * the projected (r+p) x (r+p) matrix. Cost O(d^2 (r+p)) per power round.
 */
EigenPairs randomized_top_eigenpairs(const Matrix& s, Index r, Index oversample, int power_iterations,
                                     std::uint64_t seed);

/// L with L L^T = S for symmetric PSD S (eigen square root, negatives clipped to 0).
Matrix psd_sqrt_factor(const Matrix& s);

/// Largest singular value.
double spectral_norm(const Matrix& a);

} // namespace lrgda
