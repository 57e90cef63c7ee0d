#include "lrgda/hopdc.hpp"

#include "lrgda/linalg.hpp"
#include "lrgda/parallel.hpp"
#include "lrgda/rng.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>

namespace lrgda {

void HopdcConfig::validate() const
{
    if (!(tau > 0) || !std::isfinite(tau))
        throw InputError("HopDC temperature must be positive, got " + std::to_string(tau));
    if (top_k < 1)
        throw InputError("HopDC top-k must be >= 1, got " + std::to_string(top_k));
    if (m_samples < 2)
        throw InputError("HopDC needs at least 2 samples per class, got " + std::to_string(m_samples));
}

RowMatrix normalize_rows(const RowMatrix& x, const std::string& what)
{
    RowMatrix out(x.rows(), x.cols());
    for (Index i = 0; i < x.rows(); ++i) {
        const double n = x.row(i).norm();
        if (!(n > 0) || !std::isfinite(n))
            throw InputError(what + " " + std::to_string(i) + " has zero or non-finite norm");
        out.row(i) = x.row(i) / n;
    }
    return out;
}

AnchorBank build_anchor_bank(const RowMatrix& f_old, const RowMatrix& f_new)
{
    if (f_old.rows() != f_new.rows() || f_old.cols() != f_new.cols())
        throw InputError("anchor shapes differ: old " + shape_str(f_old.rows(), f_old.cols()) + ", new " +
                         shape_str(f_new.rows(), f_new.cols()));
    if (f_old.rows() == 0)
        throw InputError("anchor bank is empty");
    AnchorBank bank;
    bank.keys = normalize_rows(f_old, "anchor row");
    bank.f_old = f_old;
    bank.f_new = f_new;
    bank.drift = f_new - f_old;
    return bank;
}

AnchorBank build_anchor_bank(const RowMatrix& f_old, const RowMatrix& f_new, const RowMatrix& extra_old,
                             const RowMatrix& extra_new)
{
    if (extra_old.rows() == 0 && extra_new.rows() == 0)
        return build_anchor_bank(f_old, f_new);
    if (extra_old.cols() != f_old.cols() || extra_new.cols() != f_new.cols())
        throw InputError("supplement anchors have a different dimension");
    RowMatrix old_all(f_old.rows() + extra_old.rows(), f_old.cols());
    RowMatrix new_all(f_new.rows() + extra_new.rows(), f_new.cols());
    old_all << f_old, extra_old;
    new_all << f_new, extra_new;
    return build_anchor_bank(old_all, new_all);
}

namespace {

// Kept columns and weights per row, k entries each, columns ascending within a row.
struct SparseAttention {
    Index k = 0;
    std::vector<Index> cols;
    std::vector<double> weights;
};

SparseAttention topk_attention(const RowMatrix& scores, double tau, Index k)
{
    if (k <= 0)
        throw InputError("top-k must be positive, got " + std::to_string(k));
    if (!(tau > 0))
        throw InputError("temperature must be positive");
    const Index n = scores.cols();
    SparseAttention att;
    att.k = std::min(k, n);
    const auto kk = static_cast<std::size_t>(att.k);
    att.cols.resize(static_cast<std::size_t>(scores.rows()) * kk);
    att.weights.resize(att.cols.size());
    std::vector<double> vals(static_cast<std::size_t>(n));
    std::vector<Index> kept;
    kept.reserve(kk);
    for (Index i = 0; i < scores.rows(); ++i) {
        const double* row = scores.row(i).data();
        // k-th largest score; columns above it are kept, ties at it go to the lowest columns.
        std::copy(row, row + n, vals.begin());
        std::nth_element(vals.begin(), vals.begin() + static_cast<std::ptrdiff_t>(kk - 1), vals.end(),
                         std::greater<>());
        const double kth = vals[kk - 1];
        std::size_t above = 0;
        for (Index j = 0; j < n; ++j)
            above += row[j] > kth;
        std::size_t ties = kk - above;
        kept.clear();
        for (Index j = 0; j < n; ++j)
            if (row[j] > kth || (row[j] == kth && ties > 0 && ties--))
                kept.push_back(j);
        double top = kth;
        for (const Index j : kept)
            top = std::max(top, row[j]);
        Index* c = att.cols.data() + static_cast<std::size_t>(i) * kk;
        double* w = att.weights.data() + static_cast<std::size_t>(i) * kk;
        double total = 0.0;
        for (std::size_t j = 0; j < kk; ++j) {
            c[j] = kept[j];
            w[j] = std::exp((row[kept[j]] - top) / tau);
            total += w[j];
        }
        for (std::size_t j = 0; j < kk; ++j)
            w[j] /= total;
    }
    return att;
}

RowMatrix attend(const SparseAttention& att, const RowMatrix& values, Index rows)
{
    RowMatrix out = RowMatrix::Zero(rows, values.cols());
    const auto kk = static_cast<std::size_t>(att.k);
    for (Index i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < kk; ++j) {
            const std::size_t at = static_cast<std::size_t>(i) * kk + j;
            out.row(i) += att.weights[at] * values.row(att.cols[at]);
        }
    return out;
}

} // namespace

RowMatrix topk_softmax(const RowMatrix& scores, double tau, Index k)
{
    const SparseAttention att = topk_attention(scores, tau, k);
    RowMatrix out = RowMatrix::Zero(scores.rows(), scores.cols());
    const auto kk = static_cast<std::size_t>(att.k);
    for (Index i = 0; i < scores.rows(); ++i)
        for (std::size_t j = 0; j < kk; ++j)
            out(i, att.cols[static_cast<std::size_t>(i) * kk + j]) = att.weights[static_cast<std::size_t>(i) * kk + j];
    return out;
}

RowMatrix estimate_drift(const AnchorBank& bank, const RowMatrix& z, const HopdcConfig& cfg)
{
    if (z.cols() != bank.dim())
        throw InputError("pseudo-features have " + std::to_string(z.cols()) + " columns, anchors have " +
                         std::to_string(bank.dim()));
    const RowMatrix q = normalize_rows(z, "pseudo-feature row");
    const SparseAttention att = topk_attention(q * bank.keys.transpose(), cfg.tau, cfg.effective_k(bank.size()));
    return attend(att, bank.drift, z.rows());
}

GaussianClassStats compensate_class(const GaussianClassStats& stats, const AnchorBank& bank,
                                    const HopdcConfig& cfg, RowMatrix* samples_out)
{
    cfg.validate();
    if (stats.dim() != bank.dim())
        throw InputError("class " + std::to_string(stats.class_id) + " has dim " + std::to_string(stats.dim()) +
                         ", anchors have " + std::to_string(bank.dim()));
    const Matrix root = psd_sqrt_factor(stats.sigma);
    Rng rng = make_rng(cfg.seed, "hopdc-samples", stats.class_id);
    const RowMatrix eps = standard_normal(cfg.m_samples, stats.dim(), rng);
    const RowMatrix z = (eps * root.transpose()).rowwise() + stats.mu.transpose();
    const RowMatrix calibrated = z + estimate_drift(bank, z, cfg);
    GaussianClassStats out = reestimate_from_samples(calibrated, stats.class_id);
    out.count = stats.count;
    if (samples_out)
        *samples_out = z;
    return out;
}

void compensate_registry(StatsRegistry& registry, const AnchorBank& bank, const HopdcConfig& cfg, int threads)
{
    const auto ids = registry.class_ids();
    std::vector<GaussianClassStats> updated(ids.size());
    parallel_for(ids.size(), threads,
                 [&](std::size_t i) { updated[i] = compensate_class(registry.stats(ids[i]), bank, cfg); });
    for (const auto& s : updated)
        registry.set(s);
}

namespace {

double log_sum_exp(const Vector& x)
{
    const double m = x.maxCoeff();
    return m + std::log((x.array() - m).exp().sum());
}

} // namespace

double hopfield_energy(const Vector& z, const RowMatrix& keys, double beta)
{
    if (!(beta > 0))
        throw InputError("beta must be positive");
    const Vector a = beta * (keys * z);
    const double max_norm_sq = keys.rowwise().squaredNorm().maxCoeff();
    return -log_sum_exp(a) / beta + 0.5 * z.squaredNorm() + 0.5 * max_norm_sq;
}

Vector hopfield_update(const Vector& z, const RowMatrix& keys, double beta)
{
    Vector a = beta * (keys * z);
    a = (a.array() - a.maxCoeff()).exp();
    a /= a.sum();
    return keys.transpose() * a;
}

DriftOracle constant_drift(const Vector& v)
{
    return {"constant", 0.0, [v](const RowMatrix& x) -> RowMatrix {
                RowMatrix out(x.rows(), x.cols());
                out.rowwise() = v.transpose();
                return out;
            }};
}

DriftOracle linear_drift(const Matrix& a)
{
    return {"linear", spectral_norm(a), [a](const RowMatrix& x) -> RowMatrix { return x * a.transpose(); }};
}

DriftOracle tanh_drift(double eps, const Matrix& w)
{
    return {"tanh", std::abs(eps) * spectral_norm(w), [eps, w](const RowMatrix& x) -> RowMatrix {
                return eps * (x * w.transpose()).array().tanh().matrix();
            }};
}

AnchorBank oracle_bank(const RowMatrix& keys, const DriftOracle& oracle)
{
    const RowMatrix k = normalize_rows(keys, "anchor row");
    return build_anchor_bank(k, k + oracle.apply(k));
}

BoundReport verify_error_bound(const AnchorBank& bank, const DriftOracle& oracle, const RowMatrix& queries,
                               const HopdcConfig& cfg)
{
    if (queries.cols() != bank.dim())
        throw InputError("queries have " + std::to_string(queries.cols()) + " columns, anchors have " +
                         std::to_string(bank.dim()));
    const Index k = cfg.effective_k(bank.size());
    const RowMatrix q = normalize_rows(queries, "query row");
    const SparseAttention att = topk_attention(q * bank.keys.transpose(), cfg.tau, k);
    const RowMatrix estimate = attend(att, bank.drift, q.rows());
    const RowMatrix truth = oracle.apply(q);
    const auto kk = static_cast<std::size_t>(att.k);

    BoundReport rep;
    rep.oracle = oracle.name;
    rep.lipschitz = oracle.lipschitz;
    rep.tau = cfg.tau;
    rep.k = k;
    rep.anchors = bank.size();
    rep.queries = static_cast<std::size_t>(q.rows());
    rep.tolerance = kBoundTolerance;
    rep.min_weighted_slack = std::numeric_limits<double>::infinity();
    rep.min_temperature_slack = std::numeric_limits<double>::infinity();
    const double temp_term = std::sqrt(2.0 * cfg.tau * std::log(static_cast<double>(k)));

    for (Index i = 0; i < q.rows(); ++i) {
        const double err = (estimate.row(i) - truth.row(i)).norm();
        double nearest = std::numeric_limits<double>::infinity();
        for (Index j = 0; j < bank.size(); ++j)
            nearest = std::min(nearest, (bank.keys.row(j) - q.row(i)).norm());
        double weighted = 0.0;
        for (std::size_t j = 0; j < kk; ++j) {
            const std::size_t at = static_cast<std::size_t>(i) * kk + j;
            weighted += att.weights[at] * (bank.keys.row(att.cols[at]) - q.row(i)).norm();
        }
        const double b1 = oracle.lipschitz * weighted;
        const double b2 = oracle.lipschitz * (nearest + temp_term);
        rep.max_error = std::max(rep.max_error, err);
        rep.min_weighted_slack = std::min(rep.min_weighted_slack, b1 - err);
        rep.min_temperature_slack = std::min(rep.min_temperature_slack, b2 - err);
        if (err > b1 + kBoundTolerance)
            ++rep.weighted_violations;
        if (err > b2 + kBoundTolerance)
            ++rep.temperature_violations;
    }
    return rep;
}

} // namespace lrgda
