#include "lrgda/bench.hpp"

#include "support.hpp"

#include <doctest.h>

#include <nlohmann/json.hpp>

#include <cmath>

using namespace lrgda;
using namespace testing;

namespace {

BenchConfig quick()
{
    BenchConfig cfg;
    cfg.warmup = 1;
    cfg.iters = 3;
    cfg.batch = 16;
    return cfg;
}

} // namespace

TEST_CASE("grid parsing")
{
    const auto g = parse_grid("lda:10,20:8;lrrgda:5:16:2,4");
    REQUIRE(g.size() == 4);
    CHECK(g[0].kind == ModelKind::Lda);
    CHECK(g[1].classes == 20);
    CHECK(g[2].kind == ModelKind::LrRgda);
    CHECK(g[3].rank == 4);
    CHECK(g[0].rank == 0);
    CHECK_THROWS_AS(parse_grid("lrrgda:5:16"), InputError);
    CHECK_THROWS_AS(parse_grid("qda:5:16"), InputError);
    CHECK_THROWS_AS(parse_grid("lda:x:16"), InputError);
    CHECK_THROWS_AS(parse_grid("stats:5:16"), InputError);
    CHECK_THROWS_AS(parse_grid(""), InputError);
}

TEST_CASE("synthetic statistics are reproducible and positive definite")
{
    const SyntheticStatsSource a(5, 12, 3), b(5, 12, 3);
    CHECK(a.num_classes() == 5);
    CHECK(a.class_ids() == std::vector<ClassId>{0, 1, 2, 3, 4});
    for (std::size_t i = 0; i < 5; ++i) {
        const auto s = a.class_stats(i);
        CHECK(s.mu == b.class_stats(i).mu);
        CHECK(s.sigma == a.class_stats(i).sigma);
        Eigen::SelfAdjointEigenSolver<Matrix> es(s.sigma);
        CHECK(es.eigenvalues().minCoeff() >= 0.5 - 1e-12);
    }
    CHECK(a.class_stats(0).mu != a.class_stats(1).mu);
}

TEST_CASE("bench results are consistent")
{
    BenchConfig cfg = quick();
    cfg.count_flops = true;
    const auto res = run_bench(parse_grid("lda:6:8;rgda:6:8;lrrgda:6:8:3;sgd:3:4"), cfg);
    REQUIRE(res.size() == 4);
    for (const auto& r : res) {
        CAPTURE(kind_name(r.kind));
        CHECK_FALSE(r.skipped);
        CHECK(r.construct_ms >= 0);
        CHECK(r.per_sample_us > 0);
        CHECK(r.throughput == doctest::Approx(1e6 / r.per_sample_us));
        CHECK(r.param_bytes ==
              storage_layout(r.kind, r.classes, static_cast<std::uint64_t>(r.dim), static_cast<std::uint64_t>(r.rank))
                  .total_bytes());
        CHECK(r.flops_per_sample > 0);
    }
    CHECK(res[1].flops_per_sample == 6.0 * (64 + 8));
    CHECK(res[2].flops_per_sample == 6.0 * (8 + 24 + 9 + 3));

    const std::string csv = bench_csv(res);
    CHECK(csv.rfind("kind,C,d,r,construct_ms,per_sample_us,throughput_samples_per_s,param_bytes", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
    const auto j = nlohmann::json::parse(bench_json(res));
    CHECK(j.size() == 4);
    CHECK(j[2]["kind"] == "lrrgda");
    CHECK(j[2]["r"] == 3);
    CHECK(bench_gnuplot(res).find("# rgda d=8") != std::string::npos);
}

TEST_CASE("points that do not fit are skipped, not fatal")
{
    BenchConfig cfg = quick();
    cfg.memory_fraction = 1e-12;
    const auto res = run_bench(parse_grid("rgda:4:8;lda:2:4"), cfg);
    REQUIRE(res.size() == 2);
    CHECK(res[0].skipped);
    CHECK(res[0].reason.find("MiB") != std::string::npos);
    CHECK(bench_csv(res).find("skipped") != std::string::npos);
}

TEST_CASE("bench needs three timed iterations")
{
    BenchConfig cfg = quick();
    cfg.iters = 2;
    CHECK_THROWS_AS(run_bench(parse_grid("lda:2:4"), cfg), InputError);
}

TEST_CASE("log-log slope")
{
    CHECK(loglog_slope({1, 2, 4, 8}, {3, 12, 48, 192}) == doctest::Approx(2.0));
    CHECK(loglog_slope({10, 100}, {5, 5}) == doctest::Approx(0.0));
    CHECK_THROWS_AS(loglog_slope({1}, {1}), InputError);
}

TEST_CASE("scaling shape of the scoring cost in C" * doctest::timeout(600))
{
    BenchConfig cfg;
    cfg.batch = 64;
    cfg.iters = 5;
    const std::vector<double> cs{50, 100, 200, 400};
    const auto rg = run_bench(parse_grid("rgda:50,100,200,400:256"), cfg);
    const auto lr = run_bench(parse_grid("lrrgda:50,100,200,400:256:16"), cfg);
    std::vector<double> trg, tlr;
    for (std::size_t i = 0; i < cs.size(); ++i) {
        REQUIRE_FALSE(rg[i].skipped);
        REQUIRE_FALSE(lr[i].skipped);
        trg.push_back(rg[i].per_sample_us);
        tlr.push_back(lr[i].per_sample_us);
    }
    const double s_rg = loglog_slope(cs, trg), s_lr = loglog_slope(cs, tlr);
    INFO("rgda slope ", s_rg, ", lrrgda slope ", s_lr);
    CHECK(s_rg >= 0.8);
    CHECK(s_rg <= 1.2);
    CHECK(s_lr >= 0.5);
    CHECK(s_lr <= 1.2);
}

TEST_CASE("full construction falls further behind as d grows" * doctest::timeout(600))
{
    BenchConfig cfg = quick();
    cfg.construct_repeats = 3;
    std::vector<double> ratio;
    for (int d : {128, 256, 512}) {
        const auto res = run_bench(parse_grid("rgda:48:" + std::to_string(d) + ";lrrgda:48:" + std::to_string(d) + ":16"), cfg);
        ratio.push_back(res[0].construct_ms / res[1].construct_ms);
    }
    INFO("ratios ", ratio[0], " ", ratio[1], " ", ratio[2]);
    CHECK(ratio[1] > ratio[0]);
    CHECK(ratio[2] > ratio[1]);
}
