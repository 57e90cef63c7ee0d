#pragma once

#include "lrgda/lr_rgda.hpp"
#include "lrgda/serialize.hpp"

#include <string>
#include <vector>

namespace lrgda {

/**
 * Seeded class statistics generated on demand.
 *
 * Class i has a standard normal mean and Sigma_i = s I + V_i V_i^T / q with a
 * d x q Gaussian V_i. Nothing is cached, so a sweep over large C and d only
 * ever holds a few d x d matrices besides what the classifier under test keeps.
 */
class SyntheticStatsSource : public StatsSource {
public:
    SyntheticStatsSource(std::size_t num_classes, Index dim, std::uint64_t seed, Index factor_rank = 16,
                         double floor = 0.5);

    Index dim() const override { return dim_; }
    std::size_t num_classes() const override { return classes_; }
    std::vector<ClassId> class_ids() const override;
    GaussianClassStats class_stats(std::size_t i) const override;

private:
    std::size_t classes_;
    Index dim_;
    std::uint64_t seed_;
    Index factor_rank_;
    double floor_;
};

struct BenchPoint {
    ModelKind kind = ModelKind::Lda;
    std::size_t classes = 0;
    Index dim = 0;
    Index rank = 0;
};

/// "kind:C1,C2,...:d1,d2,...[:r1,r2,...]" entries separated by ';' (cartesian product within an entry).
std::vector<BenchPoint> parse_grid(const std::string& text);

struct BenchConfig {
    int warmup = 3;
    int iters = 5;
    std::uint64_t seed = 0;
    Index batch = 64;             // rows per timed scoring call
    int threads = 1;
    int construct_repeats = 1;
    bool count_flops = false;
    bool randomized_svd = true;
    double lda_gamma = kDefaultLdaGamma;
    RegularizationParams params;  // rank is taken from each grid point
    /// Skip a point when its parameter bytes exceed this fraction of MemAvailable.
    double memory_fraction = 0.85;
};

struct BenchResult {
    ModelKind kind = ModelKind::Lda;
    std::size_t classes = 0;
    Index dim = 0;
    Index rank = 0;
    double construct_ms = 0.0;
    double per_sample_us = 0.0;
    double throughput = 0.0;  // samples per second
    std::uint64_t param_bytes = 0;
    double flops_per_sample = 0.0;  // instrumented multiply-adds, 0 when not counted
    bool skipped = false;
    std::string reason;
};

/// Median-of-iters timings per grid point. Failures at a point are recorded and the sweep continues.
std::vector<BenchResult> run_bench(const std::vector<BenchPoint>& grid, const BenchConfig& cfg);

std::string bench_csv(const std::vector<BenchResult>& results);
std::string bench_json(const std::vector<BenchResult>& results);
/// Blocks per kind (separated by two blank lines): classes, log10 throughput.
std::string bench_gnuplot(const std::vector<BenchResult>& results);

/// MemAvailable from /proc/meminfo in bytes, or 0 if unknown.
std::uint64_t available_memory_bytes();

/// Least-squares slope of log(y) against log(x).
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

} // namespace lrgda
