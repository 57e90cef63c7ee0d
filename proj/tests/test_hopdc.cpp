#include "lrgda/hopdc.hpp"
#include "lrgda/linalg.hpp"

#include "support.hpp"

#include <doctest.h>

#include <cmath>

using namespace lrgda;
using namespace testing;

namespace {

HopdcConfig config(double tau, Index k, Index m = 256, std::uint64_t seed = 0)
{
    HopdcConfig cfg;
    cfg.tau = tau;
    cfg.top_k = k;
    cfg.m_samples = m;
    cfg.seed = seed;
    return cfg;
}

RowMatrix unit_rows(Index n, Index d, Rng& rng)
{
    return normalize_rows(standard_normal(n, d, rng));
}

} // namespace

TEST_CASE("anchor bank")
{
    Rng rng = make_rng(1, "bank");
    const RowMatrix f = standard_normal(100, 16, rng);
    SUBCASE("no drift")
    {
        CHECK(build_anchor_bank(f, f).drift.isZero(0.0));
    }
    SUBCASE("keys are unit rows")
    {
        const AnchorBank bank = build_anchor_bank(f, f);
        const Matrix gram = bank.keys * bank.keys.transpose();
        CHECK((gram.diagonal().array() - 1.0).abs().maxCoeff() <= 1e-9);
    }
    SUBCASE("hand example")
    {
        RowMatrix a(1, 2);
        a << 3, 4;
        const AnchorBank bank = build_anchor_bank(a, a);
        CHECK(bank.keys(0, 0) == doctest::Approx(0.6));
        CHECK(bank.keys(0, 1) == doctest::Approx(0.8));
    }
    SUBCASE("errors")
    {
        RowMatrix z = f;
        z.row(42).setZero();
        CHECK_THROWS_WITH_AS(build_anchor_bank(z, f), doctest::Contains("42"), InputError);
        CHECK_THROWS_AS(build_anchor_bank(f, f.topRows(99)), InputError);
    }
    SUBCASE("supplement anchors are concatenated")
    {
        const AnchorBank bank = build_anchor_bank(f.topRows(60), f.topRows(60), f.bottomRows(40), f.bottomRows(40));
        CHECK(bank.size() == 100);
        CHECK(bank.f_old == f);
    }
}

TEST_CASE("top-k softmax")
{
    SUBCASE("hand example")
    {
        RowMatrix s(1, 3);
        s << 1, 2, 3;
        const RowMatrix w = topk_softmax(s, 1.0, 2);
        const double e2 = std::exp(2.0), e3 = std::exp(3.0);
        CHECK(w(0, 0) == 0.0);
        CHECK(w(0, 1) == doctest::Approx(e2 / (e2 + e3)).epsilon(1e-14));
        CHECK(w(0, 2) == doctest::Approx(e3 / (e2 + e3)).epsilon(1e-14));
    }
    Rng rng = make_rng(2, "topk");
    const RowMatrix s = standard_normal(40, 30, rng);
    SUBCASE("k = N is the plain softmax")
    {
        const RowMatrix w = topk_softmax(s, 0.3, 30);
        for (Index i = 0; i < s.rows(); ++i) {
            const Eigen::RowVectorXd e = (s.row(i).array() / 0.3).exp();
            CHECK(max_abs(w.row(i) - e / e.sum()) <= 1e-12);
        }
    }
    SUBCASE("k = 1 is one-hot on the argmax")
    {
        const RowMatrix w = topk_softmax(s, 0.05, 1);
        for (Index i = 0; i < s.rows(); ++i) {
            Index at = 0;
            s.row(i).maxCoeff(&at);
            CHECK(w(i, at) == 1.0);
            CHECK(w.row(i).sum() == 1.0);
        }
    }
    SUBCASE("rows are probability vectors with at most k entries")
    {
        const RowMatrix w = topk_softmax(s, 0.05, 7);
        CHECK((w.array() >= 0).all());
        for (Index i = 0; i < s.rows(); ++i) {
            CHECK(std::abs(w.row(i).sum() - 1.0) <= 1e-12);
            CHECK((w.row(i).array() > 0).count() <= 7);
            // Every kept score is at least every dropped score.
            double kept_min = INFINITY, dropped_max = -INFINITY;
            for (Index j = 0; j < s.cols(); ++j) {
                if (w(i, j) > 0)
                    kept_min = std::min(kept_min, s(i, j));
                else
                    dropped_max = std::max(dropped_max, s(i, j));
            }
            CHECK(kept_min >= dropped_max);
        }
    }
    SUBCASE("ties at the cut keep the lower columns")
    {
        RowMatrix t(1, 5);
        t << 0.5, 1, 1, 2, 1;
        const RowMatrix w = topk_softmax(t, 1.0, 3);
        CHECK(w(0, 3) > 0);
        CHECK(w(0, 1) > 0);
        CHECK(w(0, 2) > 0);
        CHECK(w(0, 4) == 0.0);
        CHECK(w(0, 0) == 0.0);
    }
    SUBCASE("bad arguments")
    {
        CHECK_THROWS_AS(topk_softmax(s, 0.1, 0), InputError);
        CHECK_THROWS_AS(topk_softmax(s, 0.0, 3), InputError);
    }
}

TEST_CASE("drift estimation")
{
    Rng rng = make_rng(3, "drift");
    const RowMatrix f = standard_normal(50, 6, rng);
    const RowMatrix z = standard_normal(20, 6, rng);
    SUBCASE("zero drift")
    {
        CHECK(estimate_drift(build_anchor_bank(f, f), z, config(0.05, 10)).isZero(0.0));
    }
    SUBCASE("single anchor")
    {
        const RowMatrix d = standard_normal(1, 6, rng);
        const AnchorBank bank = build_anchor_bank(f.topRows(1), f.topRows(1) + d);
        const RowMatrix est = estimate_drift(bank, z, config(0.05, 400));
        for (Index i = 0; i < est.rows(); ++i)
            CHECK(est.row(i) == bank.drift.row(0));
    }
    SUBCASE("query on an anchor at low temperature returns that anchor's drift")
    {
        const RowMatrix d = standard_normal(50, 6, rng);
        const RowMatrix est = estimate_drift(build_anchor_bank(f, f + d), f.middleRows(7, 1), config(1e-6, 50));
        CHECK(max_abs(est.row(0) - d.row(7)) <= 1e-6);
    }
    SUBCASE("estimates are convex combinations of selected anchor drifts")
    {
        const RowMatrix d = standard_normal(50, 6, rng);
        const AnchorBank bank = build_anchor_bank(f, f + d);
        const HopdcConfig cfg = config(0.2, 8);
        const RowMatrix est = estimate_drift(bank, z, cfg);
        const RowMatrix w = topk_softmax(normalize_rows(z) * bank.keys.transpose(), cfg.tau, cfg.top_k);
        for (Index i = 0; i < z.rows(); ++i) {
            std::vector<Index> cols;
            for (Index j = 0; j < w.cols(); ++j)
                if (w(i, j) > 0)
                    cols.push_back(j);
            Matrix sel(6, static_cast<Index>(cols.size()));
            for (std::size_t j = 0; j < cols.size(); ++j)
                sel.col(static_cast<Index>(j)) = d.row(cols[j]).transpose();
            const Vector coef = sel.colPivHouseholderQr().solve(est.row(i).transpose());
            CHECK((sel * coef - est.row(i).transpose()).norm() <= 1e-8);
        }
    }
    SUBCASE("zero query is rejected")
    {
        RowMatrix bad = z;
        bad.row(3).setZero();
        CHECK_THROWS_WITH_AS(estimate_drift(build_anchor_bank(f, f), bad, config(0.05, 10)), doctest::Contains("3"),
                             InputError);
    }
}

TEST_CASE("class compensation")
{
    Rng rng = make_rng(4, "comp");
    const Index d = 5;
    const Matrix sigma = random_spd(d, rng);
    const Vector mu = Vector::Constant(d, 2.0);
    const GaussianClassStats stats{3, mu, sigma, 77};
    const RowMatrix anchors = gaussian_rows(300, mu, sigma, rng);

    SUBCASE("constant drift shifts the mean by exactly v")
    {
        Vector v(d);
        v << 1, -2, 0.5, 0, 3;
        RowMatrix moved = anchors;
        moved.rowwise() += v.transpose();
        const AnchorBank bank = build_anchor_bank(anchors, moved);
        RowMatrix raw;
        const HopdcConfig cfg = config(0.05, 400, 256, 9);
        const GaussianClassStats out = compensate_class(stats, bank, cfg, &raw);
        const GaussianClassStats plain = reestimate_from_samples(raw, 3);
        CHECK(max_abs(out.mu - plain.mu - v) <= 1e-12);
        CHECK(max_abs(out.sigma - plain.sigma) <= 1e-10);
        CHECK((out.mu - (mu + v)).norm() <= 3.0 * std::sqrt(spectral_norm(sigma)) / std::sqrt(256.0) * std::sqrt(double(d)));
        CHECK(out.count == 77);
        CHECK(out.class_id == 3);
    }
    SUBCASE("no drift is pure resampling")
    {
        RowMatrix raw;
        const GaussianClassStats out = compensate_class(stats, build_anchor_bank(anchors, anchors), config(0.05, 400), &raw);
        const GaussianClassStats plain = reestimate_from_samples(raw, 3);
        CHECK(out.mu == plain.mu);
        CHECK(out.sigma == plain.sigma);
    }
    SUBCASE("linear drift stays within the weighted Lipschitz bound")
    {
        const Matrix a = 0.1 * standard_normal(d, d, rng);
        const double lip = spectral_norm(a);
        const RowMatrix dense = gaussian_rows(2000, mu, sigma, rng);
        const AnchorBank bank = build_anchor_bank(dense, dense + dense * a.transpose());
        const HopdcConfig cfg = config(0.05, 400, 256, 2);
        RowMatrix z;
        const GaussianClassStats out = compensate_class(stats, bank, cfg, &z);
        const RowMatrix w = topk_softmax(normalize_rows(z) * bank.keys.transpose(), cfg.tau, cfg.top_k);
        double bound = 0.0;
        for (Index i = 0; i < z.rows(); ++i)
            for (Index j = 0; j < w.cols(); ++j)
                if (w(i, j) > 0)
                    bound += w(i, j) * (dense.row(j) - z.row(i)).norm();
        bound *= lip / static_cast<double>(z.rows());
        const Vector zbar = z.colwise().mean().transpose();
        CHECK((out.mu - (zbar + a * zbar)).norm() <= bound + 1e-12);
        CHECK((out.mu - (mu + a * mu)).norm() <= bound + 3.0 * std::sqrt(spectral_norm(sigma) * d / 256.0) * (1 + lip));
    }
    SUBCASE("deterministic and thread independent")
    {
        const Mixture mix = random_mixture(6, d, 30, 8);
        StatsRegistry r1 = registry_of(mix.train), r3 = registry_of(mix.train);
        const AnchorBank bank = build_anchor_bank(anchors, anchors * 1.1);
        compensate_registry(r1, bank, config(0.05, 100, 64, 4), 1);
        compensate_registry(r3, bank, config(0.05, 100, 64, 4), 3);
        for (ClassId c = 0; c < 6; ++c) {
            CHECK(r1.stats(c).mu == r3.stats(c).mu);
            CHECK(r1.stats(c).sigma == r3.stats(c).sigma);
        }
    }
    SUBCASE("config validation")
    {
        CHECK_THROWS_AS(config(0.0, 10).validate(), InputError);
        CHECK_THROWS_AS(config(0.1, 0).validate(), InputError);
        CHECK_THROWS_AS(config(0.1, 10, 1).validate(), InputError);
    }
}

TEST_CASE("Hopfield energy")
{
    SUBCASE("single unit pattern")
    {
        RowMatrix k = RowMatrix::Zero(1, 4);
        k(0, 0) = 1;
        CHECK(hopfield_energy(k.row(0).transpose(), k, 1.0) == doctest::Approx(0.0));
    }
    SUBCASE("log-sum-exp sandwich and one-step descent")
    {
        Rng rng = make_rng(5, "energy");
        for (int t = 0; t < 200; ++t) {
            const Index n = 1 + t % 17, d = 2 + t % 9;
            const double beta = 0.5 + (t % 7);
            const RowMatrix k = unit_rows(n, d, rng);
            const Vector z = standard_normal(d, 1, rng).col(0);
            const double e = hopfield_energy(z, k, beta);
            const double top = (k * z).maxCoeff();
            const double base = 0.5 * z.squaredNorm() + 0.5;
            CHECK(e <= -top + base + 1e-12);
            CHECK(e >= -top - std::log(double(n)) / beta + base - 1e-12);
            CHECK(hopfield_energy(hopfield_update(z, k, beta), k, beta) <= e + 1e-9);
        }
    }
    SUBCASE("beta must be positive")
    {
        CHECK_THROWS_AS(hopfield_energy(Vector::Ones(2), RowMatrix::Identity(2, 2), 0.0), InputError);
    }
}

TEST_CASE("error bounds")
{
    Rng rng = make_rng(6, "bounds");
    const RowMatrix keys = unit_rows(512, 8, rng);
    const RowMatrix q = unit_rows(2000, 8, rng);
    SUBCASE("constant drift is recovered exactly")
    {
        const DriftOracle o = constant_drift(Vector::Constant(8, 0.3));
        const BoundReport rep = verify_error_bound(oracle_bank(keys, o), o, q, config(0.05, 400));
        CHECK(rep.lipschitz == 0.0);
        CHECK(rep.max_error <= 1e-14);
        CHECK(rep.ok());
    }
    SUBCASE("half-identity drift satisfies both bounds")
    {
        const DriftOracle o = linear_drift(0.5 * Matrix::Identity(8, 8));
        CHECK(o.lipschitz == doctest::Approx(0.5));
        const BoundReport rep = verify_error_bound(oracle_bank(keys, o), o, q, config(0.05, 512));
        CHECK(rep.queries == 2000);
        CHECK(rep.ok());
        CHECK(rep.max_error > 0.0);
    }
    SUBCASE("nearest-neighbour limit")
    {
        const DriftOracle o = tanh_drift(0.3, standard_normal(8, 8, rng));
        const BoundReport rep = verify_error_bound(oracle_bank(keys, o), o, q, config(1e-4, 1));
        CHECK(rep.k == 1);
        CHECK(rep.weighted_violations == 0);
        CHECK(rep.temperature_violations == 0);
    }
    SUBCASE("an understated Lipschitz constant is caught")
    {
        DriftOracle o = linear_drift(0.5 * Matrix::Identity(8, 8));
        o.lipschitz = 0.01;
        const BoundReport rep = verify_error_bound(oracle_bank(keys, o), o, q, config(0.05, 400));
        CHECK_FALSE(rep.ok());
        CHECK(rep.weighted_violations > 0);
    }
}
