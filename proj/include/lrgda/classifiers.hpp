#pragma once

#include "lrgda/parallel.hpp"
#include "lrgda/stats.hpp"

#include <vector>

namespace lrgda {

struct RegularizationParams {
    double alpha1 = 0.2;
    double alpha2 = 2.0;
    double alpha3 = 0.5;
    Index rank = 64;
    /// Empty means uniform. Otherwise one entry per class in ascending class-id order.
    std::vector<double> priors;

    /// Throws InputError on negative alphas, all-zero alphas, rank < 1 or bad priors.
    void validate(std::size_t num_classes) const;
    std::vector<double> log_priors(std::size_t num_classes) const;
};

/// alpha1 * sigma_c + alpha2 * sigma_avg + alpha3 * I, symmetrized.
Matrix regularize_covariance(const Matrix& sigma_c, const Matrix& sigma_avg, const RegularizationParams& p);
Matrix regularize_covariance(const GaussianClassStats& stats, const Matrix& sigma_avg,
                             const RegularizationParams& p);

/// Row index of the maximum in each row; ties go to the lower index.
std::vector<Index> argmax_rows(const Matrix& scores);

/// Affine scorer: score_c(x) = w_c^T x + b_c.
struct LinearClassifier {
    std::vector<ClassId> class_ids;
    Matrix W;  // C x d
    Vector b;  // C
    /// Inverse of the shared covariance, kept for LDA only (empty otherwise).
    Matrix shared_precision;

    Index dim() const { return W.cols(); }
    std::size_t num_classes() const { return class_ids.size(); }
    Matrix scores(const RowMatrix& x, FlopCounter* flops = nullptr) const;
};

inline constexpr double kDefaultLdaGamma = 0.1;

/// LDA with shared covariance (1 - gamma) Sigma_avg + gamma I.
LinearClassifier build_lda(const StatsSource& source, const RegularizationParams& params,
                           double gamma = kDefaultLdaGamma);

/// Affine classifier for an explicit shared covariance: w_c = S^-1 mu_c, b_c = -mu_c^T w_c / 2 + log pi_c.
LinearClassifier build_linear_shared(const StatsSource& source, const Matrix& shared_cov,
                                     const RegularizationParams& params);

/// Full regularized GDA: one d x d precision per class.
struct RgdaClassifier {
    std::vector<ClassId> class_ids;
    Matrix mu;  // C x d, row c is mu_c
    std::vector<Matrix> precision;
    Vector log_det;
    Vector log_prior;
    /// Classes whose inversion needed the eigenvalue-clipping fallback.
    std::vector<ClassId> fallback_classes;

    Index dim() const { return mu.cols(); }
    std::size_t num_classes() const { return class_ids.size(); }
    /// score_c = -(x - mu_c)^T Lambda_c (x - mu_c) / 2 - log_det_c / 2 + log pi_c
    Matrix scores(const RowMatrix& x, int threads = 1, FlopCounter* flops = nullptr) const;
};

RgdaClassifier build_rgda(const StatsSource& source, const RegularizationParams& params, int threads = 1);

/// Single-sample convenience form of RgdaClassifier::scores.
Vector rgda_score(const RgdaClassifier& clf, const Vector& x);

struct SgdConfig {
    std::size_t batch_size = 128;
    double lr_max = 1e-3;
    double lr_min = 1e-4;
    double weight_decay = 1e-4;
    std::size_t base_steps = 5000;
    std::size_t steps_per_class = 4;
    std::size_t samples_per_class = 256;
    std::size_t patience = 100;
    double ema_decay = 0.95;
    std::uint64_t seed = 0;
};

struct SgdResult {
    LinearClassifier classifier;
    std::size_t steps_run = 0;
    std::size_t planned_steps = 0;
    double final_loss = 0.0;
};

/**
 * Softmax linear classifier trained on pseudo-features.
 *
 * samples_per_class draws from N(mu_c, Sigma_c^reg) are taken once up front,
 * then AdamW runs for base_steps + steps_per_class * C steps with a cosine
 * decay from lr_max to lr_min. Training stops early once the EMA of the
 * minibatch loss has not improved for `patience` steps.
 */
SgdResult train_sgd_baseline(const StatsSource& source, const RegularizationParams& params,
                             const SgdConfig& cfg = {});

} // namespace lrgda
