#include "lrgda/lr_rgda.hpp"

#include "lrgda/rng.hpp"

#include <cmath>
#include <string_view>

namespace lrgda {

EigenPairs class_spectrum(const Matrix& sigma_c, Index r, const LowRankOptions& opt)
{
    if (sigma_c.rows() != sigma_c.cols())
        throw InputError("class_spectrum: covariance is " + shape_str(sigma_c.rows(), sigma_c.cols()));
    if (r < 1 || r > sigma_c.rows())
        throw InputError("rank " + std::to_string(r) + " outside [1, " + std::to_string(sigma_c.rows()) + "]");
    EigenPairs pairs = opt.randomized
                           ? randomized_top_eigenpairs(sigma_c, r, opt.oversample, opt.power_iterations, opt.seed)
                           : top_eigenpairs(sigma_c, r);
    const double top = pairs.values(0);
    if (pairs.smallest < -kPsdTolerance * std::max(1.0, top))
        throw NumericalError("covariance is not positive semidefinite (eigenvalue " +
                             std::to_string(pairs.smallest) + ")");
    pairs.values = pairs.values.cwiseMax(0.0);
    return pairs;
}

Matrix factor_from_spectrum(const EigenPairs& spectrum, double alpha1)
{
    const Vector scale = (alpha1 * spectrum.values.array()).sqrt();
    return spectrum.vectors * scale.asDiagonal();
}

Matrix low_rank_factor(const Matrix& sigma_c, double alpha1, Index r, const LowRankOptions& opt)
{
    if (alpha1 < 0)
        throw InputError("low_rank_factor: alpha1 must be non-negative");
    return factor_from_spectrum(class_spectrum(sigma_c, r, opt), alpha1);
}

WoodburyResult woodbury_inverse(const Matrix& b_inv, const Matrix& u_tilde)
{
    if (b_inv.rows() != b_inv.cols() || u_tilde.rows() != b_inv.rows())
        throw InputError("woodbury_inverse: B^-1 is " + shape_str(b_inv.rows(), b_inv.cols()) + ", U is " +
                         shape_str(u_tilde.rows(), u_tilde.cols()));
    const Index r = u_tilde.cols();
    const Matrix binv_u = b_inv * u_tilde;
    WoodburyResult out;
    out.m = symmetrize(Matrix::Identity(r, r) + u_tilde.transpose() * binv_u);
    Eigen::LLT<Matrix> llt(out.m);
    if (llt.info() != Eigen::Success)
        throw NumericalError("woodbury_inverse: capacitance matrix is not positive definite");
    out.m_inv = symmetrize(llt.solve(Matrix::Identity(r, r)));
    out.log_det_m = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    out.inverse = symmetrize(b_inv - binv_u * out.m_inv * binv_u.transpose());
    return out;
}

double log_det_lemma(double log_det_b, const Matrix& m)
{
    return log_det_spd(m) + log_det_b;
}

std::uint64_t spectrum_fingerprint(const Matrix& sigma_c, Index r, const LowRankOptions& opt)
{
    const std::string_view bytes(reinterpret_cast<const char*>(sigma_c.data()),
                                 static_cast<std::size_t>(sigma_c.size()) * sizeof(double));
    std::uint64_t h = hash_purpose(bytes);
    h = mix64(h ^ static_cast<std::uint64_t>(sigma_c.rows()));
    h = mix64(h ^ static_cast<std::uint64_t>(r));
    if (opt.randomized) {
        h = mix64(h ^ static_cast<std::uint64_t>(opt.oversample));
        h = mix64(h ^ static_cast<std::uint64_t>(opt.power_iterations));
        h = mix64(h ^ opt.seed);
    }
    return h;
}

std::optional<EigenPairs> FactorCache::lookup(ClassId id, std::uint64_t fingerprint) const
{
    std::lock_guard lock(mutex_);
    auto it = entries_.find(id);
    if (it == entries_.end() || it->second.fingerprint != fingerprint) {
        ++misses_;
        return std::nullopt;
    }
    ++hits_;
    return it->second.spectrum;
}

void FactorCache::store(ClassId id, std::uint64_t fingerprint, EigenPairs spectrum)
{
    std::lock_guard lock(mutex_);
    entries_[id] = Entry{fingerprint, std::move(spectrum)};
}

std::size_t FactorCache::size() const
{
    std::lock_guard lock(mutex_);
    return entries_.size();
}

void FactorCache::clear()
{
    std::lock_guard lock(mutex_);
    entries_.clear();
    hits_ = misses_ = 0;
}

LrClassParams LrRgdaClassifier::class_params(std::size_t i) const
{
    const Index ci = static_cast<Index>(i);
    LrClassParams p;
    p.class_id = class_ids.at(i);
    p.w = W.row(ci).transpose();
    p.b = bias(ci);
    p.P = P.middleRows(ci * rank, rank);
    p.m_inv = m_inv.middleRows(ci * rank, rank);
    p.center = center.row(ci).transpose();
    return p;
}

namespace {

constexpr Index kScoreChunkRows = 512;

void score_rows(const LrRgdaClassifier& clf, const RowMatrix& x, Index row0, Index rows, Matrix& out)
{
    const Index r = clf.rank;
    const auto xs = x.middleRows(row0, rows);
    Matrix lin = xs * clf.W.transpose();
    lin.rowwise() += clf.bias.transpose();
    const Matrix proj = xs * clf.P.transpose();  // rows x (C r)
    for (Index c = 0; c < static_cast<Index>(clf.num_classes()); ++c) {
        const Matrix u = proj.middleCols(c * r, r).rowwise() - clf.center.row(c);
        const Matrix v = u * clf.m_inv.middleRows(c * r, r);
        lin.col(c) += 0.5 * u.cwiseProduct(v).rowwise().sum();
    }
    out.middleRows(row0, rows) = lin;
}

} // namespace

Matrix LrRgdaClassifier::scores(const RowMatrix& x, int threads, FlopCounter* flops) const
{
    if (x.cols() != dim)
        throw InputError("scores: input has " + std::to_string(x.cols()) + " columns, classifier dim is " +
                         std::to_string(dim));
    const std::size_t c = num_classes();
    Matrix out(x.rows(), static_cast<Index>(c));
    const Index chunks = (x.rows() + kScoreChunkRows - 1) / kScoreChunkRows;
    parallel_for(static_cast<std::size_t>(chunks), threads, [&](std::size_t k) {
        const Index row0 = static_cast<Index>(k) * kScoreChunkRows;
        score_rows(*this, x, row0, std::min(kScoreChunkRows, x.rows() - row0), out);
    });
    if (flops) {
        const auto d = static_cast<std::uint64_t>(dim);
        const auto r = static_cast<std::uint64_t>(rank);
        // X W^T, X P^T, u M^-1, u . v
        flops->add(static_cast<std::uint64_t>(x.rows()) * c * (d + r * d + r * r + r));
    }
    return out;
}

LrRgdaClassifier build_lr_rgda(const StatsSource& source, const RegularizationParams& params,
                               const LrBuildOptions& opt)
{
    const std::size_t c = source.num_classes();
    if (c == 0)
        throw InputError("build_lr_rgda: no classes");
    params.validate(c);
    const Index d = source.dim();
    const Index r = params.rank;
    if (r > d)
        throw InputError("rank " + std::to_string(r) + " exceeds feature dimension " + std::to_string(d));
    if (opt.batch_classes == 0)
        throw InputError("build_lr_rgda: class batch size must be positive");

    Matrix base = params.alpha2 != 0 ? Matrix(params.alpha2 * source.average_covariance()) : Matrix::Zero(d, d);
    base.diagonal().array() += params.alpha3;
    Eigen::LLT<Matrix> base_llt(symmetrize(base));
    if (base_llt.info() != Eigen::Success)
        throw NumericalError("base matrix alpha2 * Sigma_avg + alpha3 * I is not positive definite");

    LrRgdaClassifier out;
    out.params = params;
    out.dim = d;
    out.rank = r;
    out.b_inv = symmetrize(base_llt.solve(Matrix::Identity(d, d)));
    out.log_det_b = 2.0 * base_llt.matrixLLT().diagonal().array().log().sum();
    out.class_ids = source.class_ids();
    out.W.resize(static_cast<Index>(c), d);
    out.bias.resize(static_cast<Index>(c));
    out.P.resize(static_cast<Index>(c) * r, d);
    out.m_inv.resize(static_cast<Index>(c) * r, r);
    out.center.resize(static_cast<Index>(c), r);
    const auto log_prior = params.log_priors(c);

    for (std::size_t start = 0; start < c; start += opt.batch_classes) {
        const std::size_t m = std::min(opt.batch_classes, c - start);
        const Index mi = static_cast<Index>(m);
        Matrix mus(d, mi);
        Matrix factors = Matrix::Zero(d, mi * r);

        parallel_for(m, opt.threads, [&](std::size_t j) {
            const GaussianClassStats s = source.class_stats(start + j);
            mus.col(static_cast<Index>(j)) = s.mu;
            if (params.alpha1 == 0)
                return;
            LowRankOptions svd = opt.svd;
            svd.seed = derive_seed(opt.svd.seed, "rsvd", s.class_id);
            std::optional<EigenPairs> spectrum;
            std::uint64_t fp = 0;
            if (opt.cache) {
                fp = spectrum_fingerprint(s.sigma, r, svd);
                spectrum = opt.cache->lookup(s.class_id, fp);
            }
            if (!spectrum) {
                try {
                    spectrum = class_spectrum(s.sigma, r, svd);
                } catch (const NumericalError& e) {
                    throw NumericalError("class " + std::to_string(s.class_id) + ": " + e.what());
                }
                if (opt.cache)
                    opt.cache->store(s.class_id, fp, *spectrum);
            }
            factors.middleCols(static_cast<Index>(j) * r, r) = factor_from_spectrum(*spectrum, params.alpha1);
        });

        // Batched products against the shared base inverse.
        const Matrix binv_u = out.b_inv * factors;
        const Matrix binv_mu = out.b_inv * mus;

        parallel_for(m, opt.threads, [&](std::size_t j) {
            const Index ji = static_cast<Index>(j);
            const Index ci = static_cast<Index>(start + j);
            const auto u = factors.middleCols(ji * r, r);
            const auto bu = binv_u.middleCols(ji * r, r);
            const Matrix mm = symmetrize(Matrix::Identity(r, r) + u.transpose() * bu);
            Eigen::LLT<Matrix> llt(mm);
            if (llt.info() != Eigen::Success)
                throw NumericalError("class " + std::to_string(out.class_ids[start + j]) +
                                     ": capacitance matrix is not positive definite");
            const double log_det_m = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
            const Vector mu = mus.col(ji);
            const Vector w = binv_mu.col(ji);
            out.W.row(ci) = w.transpose();
            out.P.middleRows(ci * r, r) = bu.transpose();
            out.m_inv.middleRows(ci * r, r) = symmetrize(llt.solve(Matrix::Identity(r, r)));
            out.center.row(ci) = (bu.transpose() * mu).transpose();
            out.bias(ci) = -0.5 * mu.dot(w) - 0.5 * (log_det_m + out.log_det_b) + log_prior[start + j];
        });
    }
    return out;
}

} // namespace lrgda
