#include "lrgda/classifiers.hpp"
#include "lrgda/lr_rgda.hpp"

#include "support.hpp"

#include <doctest.h>

#include <cmath>

using namespace lrgda;
using namespace testing;

namespace {

RegularizationParams with_rank(Index r)
{
    RegularizationParams p;
    p.rank = r;
    return p;
}

/// Largest across-class spread of (a - b) per row.
double offset_spread(const Matrix& a, const Matrix& b)
{
    const Matrix diff = a - b;
    double worst = 0.0;
    for (Index i = 0; i < diff.rows(); ++i)
        worst = std::max(worst, diff.row(i).maxCoeff() - diff.row(i).minCoeff());
    return worst;
}

double offset_variance_max(const Matrix& a, const Matrix& b)
{
    const Matrix diff = a - b;
    double worst = 0.0;
    for (Index i = 0; i < diff.rows(); ++i) {
        const double mean = diff.row(i).mean();
        worst = std::max(worst, (diff.row(i).array() - mean).square().mean());
    }
    return worst;
}

} // namespace

TEST_CASE("low-rank factor")
{
    SUBCASE("exact recovery of a rank-r covariance")
    {
        Rng rng = make_rng(1, "lr");
        const Matrix s = random_psd_rank(12, 3, rng);
        const Matrix u = low_rank_factor(s, 0.7, 3);
        CHECK((0.7 * s - u * u.transpose()).norm() <= 1e-8);
    }
    SUBCASE("diagonal spectrum")
    {
        Vector diag(3);
        diag << 9, 4, 1;
        const Matrix u = low_rank_factor(diag.asDiagonal(), 1.0, 1);
        CHECK(u.rows() == 3);
        CHECK(u.cols() == 1);
        CHECK(u(0, 0) == doctest::Approx(3.0));
        CHECK(std::abs(u(1, 0)) <= 1e-12);
        CHECK(std::abs(u(2, 0)) <= 1e-12);
    }
    SUBCASE("Frobenius error equals the discarded spectrum")
    {
        Rng rng = make_rng(2, "ey");
        const Matrix s = random_spd(32, rng);
        const Matrix u = low_rank_factor(s, 1.0, 8);
        Eigen::SelfAdjointEigenSolver<Matrix> es(s);
        const Vector ev = es.eigenvalues();  // ascending
        const double tail = std::sqrt(ev.head(24).squaredNorm());
        CHECK(std::abs((s - u * u.transpose()).norm() - tail) <= 1e-8);
    }
    SUBCASE("a clearly negative eigenvalue is rejected, tiny ones are clipped")
    {
        Matrix s = Matrix::Identity(4, 4);
        s(3, 3) = -1e-3;
        CHECK_THROWS_AS(low_rank_factor(s, 1.0, 4), NumericalError);
        s(3, 3) = -1e-12;
        const Matrix u = low_rank_factor(s, 1.0, 4);
        CHECK(u.allFinite());
        CHECK(u.col(3).norm() == 0.0);
    }
    SUBCASE("eigenvector signs are fixed")
    {
        Rng rng = make_rng(3, "sign");
        const Matrix u = low_rank_factor(random_spd(10, rng), 1.0, 4);
        for (Index j = 0; j < u.cols(); ++j) {
            Index at = 0;
            u.col(j).cwiseAbs().maxCoeff(&at);
            CHECK(u(at, j) > 0);
        }
    }
    SUBCASE("randomized range finder matches the exact factor on a gapped spectrum")
    {
        Rng rng = make_rng(4, "rsvd");
        const Matrix q = random_orthogonal(40, rng);
        Vector ev = Vector::Constant(40, 0.01);
        ev.head(6) << 50, 30, 20, 10, 5, 2;
        const Matrix s = q * ev.asDiagonal() * q.transpose();
        LowRankOptions opt;
        opt.randomized = true;
        opt.seed = 7;
        const Matrix ur = low_rank_factor(s, 1.0, 6, opt);
        const Matrix ue = low_rank_factor(s, 1.0, 6);
        CHECK((ur * ur.transpose() - ue * ue.transpose()).norm() <= 1e-6);
        CHECK(low_rank_factor(s, 1.0, 6, opt) == ur);
    }
    SUBCASE("rank outside [1, d] is rejected")
    {
        CHECK_THROWS_AS(low_rank_factor(Matrix::Identity(3, 3), 1.0, 4), InputError);
        CHECK_THROWS_AS(low_rank_factor(Matrix::Identity(3, 3), 1.0, 0), InputError);
    }
}

TEST_CASE("Woodbury inverse")
{
    SUBCASE("zero update")
    {
        Rng rng = make_rng(5, "wb");
        const Matrix b_inv = dense_inverse(random_spd(5, rng));
        const WoodburyResult w = woodbury_inverse(b_inv, Matrix::Zero(5, 2));
        CHECK(max_abs(w.inverse - b_inv) <= 1e-14);
        CHECK(w.m_inv == Matrix::Identity(2, 2));
    }
    SUBCASE("rank-one update of the identity")
    {
        Matrix u(2, 1);
        u << 1, 0;
        const WoodburyResult w = woodbury_inverse(Matrix::Identity(2, 2), u);
        Matrix expect(2, 2);
        expect << 0.5, 0, 0, 1;
        CHECK(max_abs(w.inverse - expect) <= 1e-15);
    }
    SUBCASE("matches a dense inverse")
    {
        Rng rng = make_rng(6, "wb24");
        const Matrix b = random_spd(24, rng);
        const Matrix u = standard_normal(24, 6, rng);
        const WoodburyResult w = woodbury_inverse(dense_inverse(b), u);
        CHECK(max_abs(w.inverse - dense_inverse(b + u * u.transpose())) <= 1e-8);
        CHECK(max_abs(w.m_inv * w.m - Matrix::Identity(6, 6)) <= 1e-10);
    }
    SUBCASE("shape mismatch")
    {
        CHECK_THROWS_AS(woodbury_inverse(Matrix::Identity(3, 3), Matrix::Zero(4, 1)), InputError);
    }
}

TEST_CASE("determinant lemma")
{
    SUBCASE("zero update")
    {
        CHECK(log_det_lemma(1.25, Matrix::Identity(3, 3)) == 1.25);
    }
    SUBCASE("identity plus a unit rank-one term")
    {
        Matrix u = Matrix::Zero(3, 1);
        u(0, 0) = 1;
        const WoodburyResult w = woodbury_inverse(Matrix::Identity(3, 3), u);
        CHECK(log_det_lemma(0.0, w.m) == doctest::Approx(std::log(2.0)));
    }
    SUBCASE("matches a dense log det")
    {
        Rng rng = make_rng(7, "ld");
        const Matrix b = random_spd(24, rng);
        const Matrix u = standard_normal(24, 6, rng);
        const WoodburyResult w = woodbury_inverse(dense_inverse(b), u);
        CHECK(std::abs(log_det_lemma(dense_log_det(b), w.m) - dense_log_det(b + u * u.transpose())) <= 1e-8);
    }
}

TEST_CASE("full rank LR-RGDA differs from RGDA by a class-independent offset")
{
    const Mixture mix = random_mixture(7, 10, 60, 30);
    const StatsRegistry reg = registry_of(mix.train);
    const RegularizationParams p = with_rank(10);
    const LrRgdaClassifier lr = build_lr_rgda(reg, p);
    const RgdaClassifier full = build_rgda(reg, p);
    Rng rng = make_rng(8, "fr");
    const RowMatrix x = 3.0 * standard_normal(2000, 10, rng);
    const Matrix a = lr.scores(x), b = full.scores(x);
    CHECK(argmax_rows(a) == argmax_rows(b));
    CHECK(offset_variance_max(a, b) <= 1e-6);
    // The offset is x^T B^-1 x / 2 up to a constant.
    const Vector offset = (a - b).col(0);
    Vector quad(x.rows());
    for (Index i = 0; i < x.rows(); ++i)
        quad(i) = 0.5 * x.row(i).dot(lr.b_inv * x.row(i).transpose());
    const Vector rest = offset - quad;
    CHECK(rest.maxCoeff() - rest.minCoeff() <= 1e-8 * (1.0 + quad.cwiseAbs().maxCoeff()));
}

TEST_CASE("approximate precision shrinks monotonically towards the full one")
{
    // B + U_r U_r^T grows in Loewner order with r, so its inverse shrinks.
    Rng rng = make_rng(9, "mono");
    const Index d = 16;
    const Matrix sigma_c = random_spd(d, rng);
    const Matrix b = random_spd(d, rng);
    const Matrix b_inv = dense_inverse(b);
    const Matrix full_inv = dense_inverse(b + 0.8 * sigma_c);
    Matrix prev;
    for (Index r : {1, 2, 4, 8, 12, 16}) {
        CAPTURE(r);
        const Matrix approx = woodbury_inverse(b_inv, low_rank_factor(sigma_c, 0.8, r)).inverse;
        const Matrix gap = approx - full_inv;
        CHECK(Eigen::SelfAdjointEigenSolver<Matrix>(0.5 * (gap + gap.transpose())).eigenvalues().minCoeff() >= -1e-10);
        if (prev.size() > 0) {
            const Matrix step = prev - approx;
            CHECK(Eigen::SelfAdjointEigenSolver<Matrix>(0.5 * (step + step.transpose())).eigenvalues().minCoeff() >=
                  -1e-10);
        }
        prev = approx;
    }
    CHECK(max_abs(prev - full_inv) <= 1e-10);

    const Mixture mix = random_mixture(5, d, 80, 31);
    const StatsRegistry reg = registry_of(mix.train);
    const RowMatrix x = 3.0 * standard_normal(500, d, rng);
    CHECK(offset_spread(build_lr_rgda(reg, with_rank(d)).scores(x), build_rgda(reg, with_rank(d)).scores(x)) <= 1e-6);
}

TEST_CASE("alpha1 = 0 collapses to the linear classifier on B")
{
    const Mixture mix = random_mixture(6, 8, 50, 32);
    const StatsRegistry reg = registry_of(mix.train);
    RegularizationParams p = with_rank(3);
    p.alpha1 = 0.0;
    const LrRgdaClassifier lr = build_lr_rgda(reg, p);
    const Matrix b = p.alpha2 * average_covariance(reg) + p.alpha3 * Matrix::Identity(8, 8);
    const LinearClassifier lin = build_linear_shared(reg, b, p);
    Rng rng = make_rng(10, "a1");
    const RowMatrix x = 3.0 * standard_normal(1000, 8, rng);
    CHECK(argmax_rows(lr.scores(x)) == argmax_rows(lin.scores(x)));
    CHECK(lr.P.isZero(0.0));
}

TEST_CASE("class parameters")
{
    const Mixture mix = random_mixture(3, 6, 40, 33);
    const StatsRegistry reg = registry_of(mix.train);
    const LrRgdaClassifier lr = build_lr_rgda(reg, with_rank(2));
    for (std::size_t c = 0; c < 3; ++c) {
        const LrClassParams cp = lr.class_params(c);
        const Vector mu = reg.stats(static_cast<ClassId>(c)).mu;
        CHECK(cp.P.rows() == 2);
        CHECK(cp.P.cols() == 6);
        CHECK(cp.w.size() + 1 + cp.P.size() + cp.m_inv.size() == 6 + 1 + 6 * 2 + 2 * 2);
        // At x = mu_c the quadratic correction vanishes.
        RowMatrix x = mu.transpose();
        CHECK(lr.scores(x)(0, static_cast<Index>(c)) == doctest::Approx(cp.w.dot(mu) + cp.b).epsilon(1e-12));
        CHECK(max_abs(cp.center - cp.P * mu) <= 1e-12);
        CHECK(max_abs(cp.w - lr.b_inv * mu) <= 1e-12);
        CHECK(cp.m_inv.llt().info() == Eigen::Success);
    }
    CHECK_THROWS_AS(build_lr_rgda(reg, with_rank(7)), InputError);
}

TEST_CASE("bias matches the determinant lemma and a dense log det")
{
    const Mixture mix = random_mixture(3, 6, 40, 34);
    const StatsRegistry reg = registry_of(mix.train);
    const RegularizationParams p = with_rank(3);
    const LrRgdaClassifier lr = build_lr_rgda(reg, p);
    const Matrix avg = average_covariance(reg);
    const Matrix b = p.alpha2 * avg + p.alpha3 * Matrix::Identity(6, 6);
    for (std::size_t c = 0; c < 3; ++c) {
        const auto st = reg.stats(static_cast<ClassId>(c));
        const Matrix u = low_rank_factor(st.sigma, p.alpha1, 3);
        const Matrix sreg = b + u * u.transpose();
        const double expect = -0.5 * st.mu.dot(dense_inverse(b) * st.mu) - 0.5 * dense_log_det(sreg) + std::log(1.0 / 3);
        CHECK(lr.class_params(c).b == doctest::Approx(expect).epsilon(1e-10));
    }
}

TEST_CASE("construction is independent of batch size and threads")
{
    const Mixture mix = random_mixture(30, 8, 20, 35);
    const StatsRegistry reg = registry_of(mix.train);
    LrBuildOptions one, twelve, many;
    one.batch_classes = 1;
    many.batch_classes = 100;
    many.threads = 3;
    const auto a = build_lr_rgda(reg, with_rank(3), one);
    const auto b = build_lr_rgda(reg, with_rank(3), twelve);
    const auto c = build_lr_rgda(reg, with_rank(3), many);
    Rng rng = make_rng(11, "batch");
    const RowMatrix x = 3.0 * standard_normal(700, 8, rng);
    CHECK(max_abs(a.scores(x) - b.scores(x)) <= 1e-10);
    CHECK(max_abs(c.scores(x) - b.scores(x)) <= 1e-10);
    CHECK(b.scores(x, 4) == b.scores(x, 1));
}

TEST_CASE("factor cache reuses spectra only for unchanged covariances")
{
    const Mixture mix = random_mixture(4, 6, 30, 36);
    StatsRegistry reg = registry_of(mix.train);
    FactorCache cache;
    LrBuildOptions opt;
    opt.cache = &cache;
    const auto first = build_lr_rgda(reg, with_rank(2), opt);
    CHECK(cache.misses() == 4);
    CHECK(cache.hits() == 0);
    const auto second = build_lr_rgda(reg, with_rank(2), opt);
    CHECK(cache.hits() == 4);
    CHECK(second.P == first.P);

    GaussianClassStats s = reg.stats(1);
    s.sigma *= 2.0;
    reg.set(s);
    const auto third = build_lr_rgda(reg, with_rank(2), opt);
    CHECK(cache.hits() == 7);
    CHECK(cache.misses() == 5);
    const auto fresh = build_lr_rgda(reg, with_rank(2));
    CHECK(third.P == fresh.P);
}

TEST_CASE("instrumented multiply-adds stay under the analytic count")
{
    const Mixture mix = random_mixture(9, 20, 30, 37);
    const StatsRegistry reg = registry_of(mix.train);
    const Index r = 5, d = 20, C = 9;
    const LrRgdaClassifier lr = build_lr_rgda(reg, with_rank(r));
    Rng rng = make_rng(12, "flops");
    const RowMatrix x = standard_normal(33, d, rng);
    FlopCounter fc;
    lr.scores(x, 1, &fc);
    const double per_sample = static_cast<double>(fc.multiply_adds) / 33.0;
    CHECK(per_sample == static_cast<double>(C * (d + r * d + r * r + r)));
    CHECK(per_sample <= 1.1 * static_cast<double>(d * d + C * (2 * d * r + r * r) + 3 * C * d));

    FlopCounter full;
    build_rgda(reg, {}).scores(x, 1, &full);
    CHECK(static_cast<double>(full.multiply_adds) / 33.0 >= static_cast<double>(C * d * d));
}
