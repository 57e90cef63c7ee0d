#include "lrgda/classifiers.hpp"

#include "lrgda/linalg.hpp"
#include "lrgda/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace lrgda {

void RegularizationParams::validate(std::size_t num_classes) const
{
    if (alpha1 < 0 || alpha2 < 0 || alpha3 < 0)
        throw InputError("regularization weights must be non-negative");
    if (alpha1 + alpha2 + alpha3 <= 0)
        throw InputError("at least one of alpha1, alpha2, alpha3 must be positive");
    if (rank < 1)
        throw InputError("rank must be >= 1, got " + std::to_string(rank));
    if (priors.empty())
        return;
    if (priors.size() != num_classes)
        throw InputError("got " + std::to_string(priors.size()) + " priors for " + std::to_string(num_classes) +
                         " classes");
    double total = 0.0;
    for (double p : priors) {
        if (!(p > 0))
            throw InputError("class priors must be positive");
        total += p;
    }
    if (std::abs(total - 1.0) > 1e-12)
        throw InputError("class priors sum to " + std::to_string(total) + ", expected 1");
}

std::vector<double> RegularizationParams::log_priors(std::size_t num_classes) const
{
    if (priors.empty())
        return std::vector<double>(num_classes, -std::log(static_cast<double>(num_classes)));
    std::vector<double> out(priors.size());
    std::transform(priors.begin(), priors.end(), out.begin(), [](double p) { return std::log(p); });
    return out;
}

Matrix regularize_covariance(const Matrix& sigma_c, const Matrix& sigma_avg, const RegularizationParams& p)
{
    if (sigma_c.rows() != sigma_avg.rows() || sigma_c.cols() != sigma_avg.cols() || sigma_c.rows() != sigma_c.cols())
        throw InputError("regularize_covariance: shapes " + shape_str(sigma_c.rows(), sigma_c.cols()) + " and " +
                         shape_str(sigma_avg.rows(), sigma_avg.cols()) + " disagree");
    Matrix out = p.alpha1 * sigma_c + p.alpha2 * sigma_avg;
    out.diagonal().array() += p.alpha3;
    return symmetrize(out);
}

Matrix regularize_covariance(const GaussianClassStats& stats, const Matrix& sigma_avg,
                             const RegularizationParams& p)
{
    return regularize_covariance(stats.sigma, sigma_avg, p);
}

std::vector<Index> argmax_rows(const Matrix& scores)
{
    std::vector<Index> out(static_cast<std::size_t>(scores.rows()), 0);
    for (Index i = 0; i < scores.rows(); ++i) {
        Index best = 0;
        for (Index c = 1; c < scores.cols(); ++c)
            if (scores(i, c) > scores(i, best))
                best = c;
        out[static_cast<std::size_t>(i)] = best;
    }
    return out;
}

Matrix LinearClassifier::scores(const RowMatrix& x, FlopCounter* flops) const
{
    if (x.cols() != dim())
        throw InputError("scores: input has " + std::to_string(x.cols()) + " columns, classifier dim is " +
                         std::to_string(dim()));
    Matrix s = x * W.transpose();
    s.rowwise() += b.transpose();
    if (flops)
        flops->add(static_cast<std::uint64_t>(x.rows()) * static_cast<std::uint64_t>(W.rows() * W.cols()));
    return s;
}

namespace {

void require_classes(const StatsSource& source, std::size_t min_classes, const char* what)
{
    if (source.num_classes() < min_classes)
        throw InputError(std::string(what) + ": need at least " + std::to_string(min_classes) +
                         " classes, got " + std::to_string(source.num_classes()));
}

} // namespace

LinearClassifier build_linear_shared(const StatsSource& source, const Matrix& shared_cov,
                                     const RegularizationParams& params)
{
    const std::size_t c = source.num_classes();
    params.validate(c);
    const Index d = source.dim();
    Eigen::LLT<Matrix> llt(shared_cov);
    if (llt.info() != Eigen::Success) {
        Eigen::SelfAdjointEigenSolver<Matrix> es(shared_cov, Eigen::EigenvaluesOnly);
        const double lo = es.eigenvalues().minCoeff();
        const double hi = es.eigenvalues().maxCoeff();
        throw NumericalError("shared covariance is not positive definite (eigenvalues in [" + std::to_string(lo) +
                             ", " + std::to_string(hi) + "], condition estimate " +
                             (lo > 0 ? std::to_string(hi / lo) : std::string("inf")) + ")");
    }
    const auto log_prior = params.log_priors(c);

    LinearClassifier out;
    out.class_ids = source.class_ids();
    out.W.resize(static_cast<Index>(c), d);
    out.b.resize(static_cast<Index>(c));
    for (std::size_t i = 0; i < c; ++i) {
        const Vector mu = source.class_stats(i).mu;
        const Vector w = llt.solve(mu);
        out.W.row(static_cast<Index>(i)) = w.transpose();
        out.b(static_cast<Index>(i)) = -0.5 * mu.dot(w) + log_prior[i];
    }
    out.shared_precision = symmetrize(llt.solve(Matrix::Identity(d, d)));
    return out;
}

LinearClassifier build_lda(const StatsSource& source, const RegularizationParams& params, double gamma)
{
    require_classes(source, 2, "build_lda");
    if (gamma < 0 || gamma > 1)
        throw InputError("LDA shrinkage gamma must lie in [0, 1]");
    Matrix shared = (1.0 - gamma) * source.average_covariance();
    shared.diagonal().array() += gamma;
    return build_linear_shared(source, shared, params);
}

RgdaClassifier build_rgda(const StatsSource& source, const RegularizationParams& params, int threads)
{
    require_classes(source, 1, "build_rgda");
    const std::size_t c = source.num_classes();
    params.validate(c);
    const Index d = source.dim();
    const Matrix sigma_avg = params.alpha2 != 0 ? source.average_covariance() : Matrix::Zero(d, d);
    const auto log_prior = params.log_priors(c);

    RgdaClassifier out;
    out.class_ids = source.class_ids();
    out.mu.resize(static_cast<Index>(c), d);
    out.precision.resize(c);
    out.log_det.resize(static_cast<Index>(c));
    out.log_prior.resize(static_cast<Index>(c));
    std::vector<char> fallback(c, 0);

    parallel_for(c, threads, [&](std::size_t i) {
        const GaussianClassStats s = source.class_stats(i);
        SpdInverse inv;
        try {
            inv = invert_spd(regularize_covariance(s, sigma_avg, params));
        } catch (const NumericalError& e) {
            throw NumericalError("class " + std::to_string(s.class_id) +
                                 ": regularized covariance is singular: " + e.what());
        }
        out.mu.row(static_cast<Index>(i)) = s.mu.transpose();
        out.precision[i] = std::move(inv.inverse);
        out.log_det(static_cast<Index>(i)) = inv.log_det;
        out.log_prior(static_cast<Index>(i)) = log_prior[i];
        fallback[i] = inv.used_fallback;
    });
    for (std::size_t i = 0; i < c; ++i)
        if (fallback[i])
            out.fallback_classes.push_back(out.class_ids[i]);
    return out;
}

Matrix RgdaClassifier::scores(const RowMatrix& x, int threads, FlopCounter* flops) const
{
    if (x.cols() != dim())
        throw InputError("scores: input has " + std::to_string(x.cols()) + " columns, classifier dim is " +
                         std::to_string(dim()));
    const std::size_t c = num_classes();
    Matrix s(x.rows(), static_cast<Index>(c));
    parallel_for(c, threads, [&](std::size_t i) {
        const Index ci = static_cast<Index>(i);
        const RowMatrix diff = x.rowwise() - mu.row(ci);
        const RowMatrix y = diff * precision[i];
        s.col(ci) = -0.5 * (y.cwiseProduct(diff)).rowwise().sum();
        s.col(ci).array() += -0.5 * log_det(ci) + log_prior(ci);
    });
    if (flops) {
        const auto d = static_cast<std::uint64_t>(dim());
        flops->add(static_cast<std::uint64_t>(x.rows()) * c * (d * d + d));
    }
    return s;
}

Vector rgda_score(const RgdaClassifier& clf, const Vector& x)
{
    RowMatrix row = x.transpose();
    return clf.scores(row).row(0).transpose();
}

SgdResult train_sgd_baseline(const StatsSource& source, const RegularizationParams& params, const SgdConfig& cfg)
{
    require_classes(source, 2, "train_sgd_baseline");
    if (cfg.batch_size == 0 || cfg.samples_per_class == 0)
        throw InputError("train_sgd_baseline: batch size and samples per class must be positive");
    const std::size_t c = source.num_classes();
    params.validate(c);
    const Index d = source.dim();
    const Matrix sigma_avg = source.average_covariance();

    // Pseudo-features, drawn once.
    const Index per_class = static_cast<Index>(cfg.samples_per_class);
    const Index n = per_class * static_cast<Index>(c);
    RowMatrix feats(n, d);
    std::vector<Index> labels(static_cast<std::size_t>(n));
    for (std::size_t i = 0; i < c; ++i) {
        const GaussianClassStats s = source.class_stats(i);
        const Matrix root = psd_sqrt_factor(regularize_covariance(s, sigma_avg, params));
        Rng rng = make_rng(cfg.seed, "sgd-pseudo", s.class_id);
        const RowMatrix z = standard_normal(per_class, d, rng);
        const Index r0 = static_cast<Index>(i) * per_class;
        feats.middleRows(r0, per_class) = (z * root.transpose()).rowwise() + s.mu.transpose();
        std::fill(labels.begin() + r0, labels.begin() + r0 + per_class, static_cast<Index>(i));
    }

    const std::size_t planned = cfg.base_steps + cfg.steps_per_class * c;
    const Index cc = static_cast<Index>(c);
    Matrix w = Matrix::Zero(cc, d);
    Vector b = Vector::Zero(cc);
    Matrix mw = Matrix::Zero(cc, d), vw = Matrix::Zero(cc, d);
    Vector mb = Vector::Zero(cc), vb = Vector::Zero(cc);
    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

    Rng rng = make_rng(cfg.seed, "sgd-batches");
    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    std::shuffle(order.begin(), order.end(), rng);
    std::size_t cursor = 0;

    const Index bs = static_cast<Index>(std::min<std::size_t>(cfg.batch_size, static_cast<std::size_t>(n)));
    RowMatrix xb(bs, d);
    std::vector<Index> yb(static_cast<std::size_t>(bs));

    double ema = 0.0, best = std::numeric_limits<double>::infinity(), loss = 0.0;
    std::size_t since_best = 0, step = 0;
    for (; step < planned; ++step) {
        for (Index k = 0; k < bs; ++k) {
            if (cursor == order.size()) {
                std::shuffle(order.begin(), order.end(), rng);
                cursor = 0;
            }
            const Index row = order[cursor++];
            xb.row(k) = feats.row(row);
            yb[static_cast<std::size_t>(k)] = labels[static_cast<std::size_t>(row)];
        }
        Matrix logits = xb * w.transpose();
        logits.rowwise() += b.transpose();
        loss = 0.0;
        for (Index k = 0; k < bs; ++k) {
            const double m = logits.row(k).maxCoeff();
            logits.row(k).array() = (logits.row(k).array() - m).exp();
            const double z = logits.row(k).sum();
            logits.row(k) /= z;
            loss -= std::log(logits(k, yb[static_cast<std::size_t>(k)]));
        }
        loss /= static_cast<double>(bs);
        if (!std::isfinite(loss))
            throw NumericalError("SGD baseline: non-finite loss at step " + std::to_string(step));

        for (Index k = 0; k < bs; ++k)
            logits(k, yb[static_cast<std::size_t>(k)]) -= 1.0;
        logits /= static_cast<double>(bs);
        const Matrix gw = logits.transpose() * xb;
        const Vector gb = logits.colwise().sum().transpose();

        const double t = static_cast<double>(step + 1);
        const double lr = cfg.lr_min + 0.5 * (cfg.lr_max - cfg.lr_min) *
                                           (1.0 + std::cos(std::numbers::pi * static_cast<double>(step) /
                                                           static_cast<double>(planned)));
        const double c1 = 1.0 - std::pow(beta1, t), c2 = 1.0 - std::pow(beta2, t);
        w *= 1.0 - lr * cfg.weight_decay;
        b *= 1.0 - lr * cfg.weight_decay;
        mw = beta1 * mw + (1 - beta1) * gw;
        vw = beta2 * vw + (1 - beta2) * gw.cwiseAbs2();
        mb = beta1 * mb + (1 - beta1) * gb;
        vb = beta2 * vb + (1 - beta2) * gb.cwiseAbs2();
        w.array() -= lr * (mw.array() / c1) / ((vw.array() / c2).sqrt() + eps);
        b.array() -= lr * (mb.array() / c1) / ((vb.array() / c2).sqrt() + eps);

        ema = step == 0 ? loss : cfg.ema_decay * ema + (1 - cfg.ema_decay) * loss;
        if (ema < best) {
            best = ema;
            since_best = 0;
        } else if (++since_best >= cfg.patience) {
            ++step;
            break;
        }
    }

    SgdResult out;
    out.classifier.class_ids = source.class_ids();
    out.classifier.W = std::move(w);
    out.classifier.b = std::move(b);
    out.steps_run = step;
    out.planned_steps = planned;
    out.final_loss = loss;
    return out;
}

} // namespace lrgda
