#pragma once

#include "lrgda/classifiers.hpp"
#include "lrgda/linalg.hpp"

#include <map>
#include <mutex>
#include <optional>

namespace lrgda {

struct LowRankOptions {
    bool randomized = false;
    Index oversample = 8;
    int power_iterations = 2;
    std::uint64_t seed = 0;
};

/// PSD tolerance on the smallest eigenvalue, relative to max(1, largest eigenvalue).
inline constexpr double kPsdTolerance = 1e-8;

/**
 * Top-r spectrum of a class covariance with the PSD check applied.
 *
 * Throws NumericalError if an eigenvalue is below -kPsdTolerance * max(1, lambda_max).
 * Remaining tiny negatives are clipped to zero.
 */
EigenPairs class_spectrum(const Matrix& sigma_c, Index r, const LowRankOptions& opt = {});

/// U_tilde = sqrt(alpha1) * U * S^(1/2) from a spectrum.
Matrix factor_from_spectrum(const EigenPairs& spectrum, double alpha1);

/// U_tilde (d x r) with U_tilde U_tilde^T the best rank-r approximation of alpha1 * sigma_c.
Matrix low_rank_factor(const Matrix& sigma_c, double alpha1, Index r, const LowRankOptions& opt = {});

struct WoodburyResult {
    Matrix inverse;  // (B + U U^T)^-1
    Matrix m;        // I_r + U^T B^-1 U
    Matrix m_inv;
    double log_det_m = 0.0;
};

/// B^-1 - B^-1 U M^-1 U^T B^-1 with M = I_r + U^T B^-1 U.
WoodburyResult woodbury_inverse(const Matrix& b_inv, const Matrix& u_tilde);

/// log det(B + U U^T) = log det(M) + log det(B).
double log_det_lemma(double log_det_b, const Matrix& m);

/// Content hash of a covariance together with the factorization settings.
std::uint64_t spectrum_fingerprint(const Matrix& sigma_c, Index r, const LowRankOptions& opt);

/**
 * Per-class cache of (U_c, S_c).
 *
 * Only the spectrum of Sigma_c is cached. Everything that depends on the base
 * matrix B (P_c, M_c, w_c, b_c) is rebuilt on every construction, since B
 * moves whenever Sigma_avg does. An entry is reused only if the fingerprint of
 * the class covariance matches; otherwise it is replaced.
 */
class FactorCache {
public:
    std::optional<EigenPairs> lookup(ClassId id, std::uint64_t fingerprint) const;
    void store(ClassId id, std::uint64_t fingerprint, EigenPairs spectrum);
    std::size_t size() const;
    std::size_t hits() const { return hits_; }
    std::size_t misses() const { return misses_; }
    void clear();

private:
    struct Entry {
        std::uint64_t fingerprint;
        EigenPairs spectrum;
    };
    mutable std::mutex mutex_;
    std::map<ClassId, Entry> entries_;
    mutable std::size_t hits_ = 0;
    mutable std::size_t misses_ = 0;
};

/// One class's inference parameters, copied out of the stacked classifier storage.
struct LrClassParams {
    ClassId class_id = 0;
    Vector w;        // B^-1 mu_c
    double b = 0.0;  // -mu_c^T B^-1 mu_c / 2 - log det(Sigma_c^reg) / 2 + log pi_c
    Matrix P;        // r x d, U_tilde^T B^-1
    Matrix m_inv;    // r x r
    Vector center;   // P mu_c
};

/**
 * Low-rank factorized RGDA.
 *
 * Class parameters are stacked so that scoring a batch is two large matrix
 * products (X W^T and X P^T) followed by C small r x r quadratic forms.
 * score_c(x) = w_c^T x + b_c + u^T M_c^-1 u / 2 with u = P_c x - P_c mu_c.
 * The class-independent term -x^T B^-1 x / 2 is omitted.
 */
struct LrRgdaClassifier {
    RegularizationParams params;
    Index dim = 0;
    Index rank = 0;
    Matrix b_inv;
    double log_det_b = 0.0;
    std::vector<ClassId> class_ids;
    Matrix W;        // C x d
    Vector bias;     // C
    RowMatrix P;     // (C r) x d, block c is P_c
    Matrix m_inv;    // (C r) x r, block c is M_c^-1
    Matrix center;   // C x r

    std::size_t num_classes() const { return class_ids.size(); }
    LrClassParams class_params(std::size_t i) const;
    Matrix scores(const RowMatrix& x, int threads = 1, FlopCounter* flops = nullptr) const;
};

struct LrBuildOptions {
    LowRankOptions svd;
    std::size_t batch_classes = 12;
    int threads = 1;
    FactorCache* cache = nullptr;
};

LrRgdaClassifier build_lr_rgda(const StatsSource& source, const RegularizationParams& params,
                               const LrBuildOptions& opt = {});

} // namespace lrgda
