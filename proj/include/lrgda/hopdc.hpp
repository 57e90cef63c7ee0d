#pragma once

#include "lrgda/stats.hpp"

#include <functional>
#include <string>

namespace lrgda {

struct HopdcConfig {
    double tau = 0.05;
    Index top_k = 400;
    Index m_samples = 256;
    std::uint64_t seed = 0;

    void validate() const;
    /// top_k clamped to the anchor count.
    Index effective_k(Index num_anchors) const { return std::min(top_k, num_anchors); }
};

/// Anchor features before and after a representation update, with derived drift and keys.
struct AnchorBank {
    RowMatrix f_old;
    RowMatrix f_new;
    RowMatrix drift;  // f_new - f_old
    RowMatrix keys;   // row-normalized f_old

    Index size() const { return f_old.rows(); }
    Index dim() const { return f_old.cols(); }
};

/// Copy of x with unit-norm rows. Throws InputError naming the first zero row.
RowMatrix normalize_rows(const RowMatrix& x, const std::string& what = "row");

AnchorBank build_anchor_bank(const RowMatrix& f_old, const RowMatrix& f_new);

/// Bank with current-task supplement anchors appended below the auxiliary ones.
AnchorBank build_anchor_bank(const RowMatrix& f_old, const RowMatrix& f_new, const RowMatrix& extra_old,
                             const RowMatrix& extra_new);

/**
 * Row-wise softmax(score / tau) restricted to the k largest entries of each row.
 *
 * Returned densely (M x N) with zeros outside the kept set. Ties at the k-th
 * position keep the lower column index. k larger than N is clamped.
 */
RowMatrix topk_softmax(const RowMatrix& scores, double tau, Index k);

/// Attention-weighted drift: topk_softmax(normalize(Z) K^T, tau, k) * D.
RowMatrix estimate_drift(const AnchorBank& bank, const RowMatrix& z, const HopdcConfig& cfg);

/**
 * Calibrate one class's statistics under the new representation.
 *
 * Draws m_samples from N(mu, Sigma) with the stream keyed by the class id,
 * adds the estimated drift to the raw draws and re-estimates mean and
 * covariance. The sample count is carried over from the input. If
 * `samples_out` is given it receives the raw draws.
 */
GaussianClassStats compensate_class(const GaussianClassStats& stats, const AnchorBank& bank,
                                    const HopdcConfig& cfg, RowMatrix* samples_out = nullptr);

/// Compensates every class of a registry in place (class order does not matter).
void compensate_registry(StatsRegistry& registry, const AnchorBank& bank, const HopdcConfig& cfg, int threads = 1);

/// -(1/beta) log sum_i exp(beta k_i^T z) + z^T z / 2 + max_i |k_i|^2 / 2
double hopfield_energy(const Vector& z, const RowMatrix& keys, double beta);

/// One retrieval step z' = softmax(beta K z)^T K.
Vector hopfield_update(const Vector& z, const RowMatrix& keys, double beta);

/// Drift function with an analytic Lipschitz constant.
struct DriftOracle {
    std::string name;
    double lipschitz = 0.0;
    std::function<RowMatrix(const RowMatrix&)> apply;  // row-wise delta(x)
};

DriftOracle constant_drift(const Vector& v);
DriftOracle linear_drift(const Matrix& a);
/// delta(x) = eps * tanh(W x), Lipschitz eps * |W|_2.
DriftOracle tanh_drift(double eps, const Matrix& w);

/// Anchor bank whose anchors are `keys` (normalized) and whose drifts are oracle(keys).
AnchorBank oracle_bank(const RowMatrix& keys, const DriftOracle& oracle);

struct BoundReport {
    std::string oracle;
    double lipschitz = 0.0;
    double tau = 0.0;
    Index k = 0;
    Index anchors = 0;
    std::size_t queries = 0;
    std::size_t weighted_violations = 0;     // error > L sum_i p_i |k_i - z|
    std::size_t temperature_violations = 0;  // error > L (min_i |k_i - z| + sqrt(2 tau log k))
    double max_error = 0.0;
    double min_weighted_slack = 0.0;
    double min_temperature_slack = 0.0;
    double tolerance = 0.0;

    bool ok() const { return weighted_violations == 0 && temperature_violations == 0; }
};

/// Absolute round-off allowance when comparing an error with its bound.
inline constexpr double kBoundTolerance = 1e-12;

/**
 * Checks both error bounds for every query.
 *
 * The bank must hold unit-norm anchors with drift rows equal to oracle(anchor)
 * (see oracle_bank). Queries are normalized here.
 */
BoundReport verify_error_bound(const AnchorBank& bank, const DriftOracle& oracle, const RowMatrix& queries,
                               const HopdcConfig& cfg);

} // namespace lrgda
