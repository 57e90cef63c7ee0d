#include "lrgda/bench.hpp"

#include "lrgda/linalg.hpp"
#include "lrgda/rng.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

namespace lrgda {

SyntheticStatsSource::SyntheticStatsSource(std::size_t num_classes, Index dim, std::uint64_t seed,
                                           Index factor_rank, double floor)
    : classes_(num_classes), dim_(dim), seed_(seed), factor_rank_(factor_rank), floor_(floor)
{
    if (dim < 1 || factor_rank < 1 || !(floor > 0))
        throw InputError("SyntheticStatsSource: invalid parameters");
}

std::vector<ClassId> SyntheticStatsSource::class_ids() const
{
    std::vector<ClassId> ids(classes_);
    for (std::size_t i = 0; i < classes_; ++i)
        ids[i] = static_cast<ClassId>(i);
    return ids;
}

GaussianClassStats SyntheticStatsSource::class_stats(std::size_t i) const
{
    Rng rng = make_rng(seed_, "synthetic-stats", i);
    GaussianClassStats s;
    s.class_id = static_cast<ClassId>(i);
    s.count = 1000;
    s.mu = standard_normal(dim_, 1, rng).col(0);
    const Matrix v = standard_normal(dim_, factor_rank_, rng);
    s.sigma = v * v.transpose() / static_cast<double>(factor_rank_);
    s.sigma.diagonal().array() += floor_;
    return s;
}

namespace {

std::vector<std::string> split(const std::string& s, char sep)
{
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep))
        if (!item.empty())
            out.push_back(item);
    return out;
}

std::vector<long long> parse_ints(const std::string& field, const std::string& entry)
{
    std::vector<long long> out;
    for (const auto& tok : split(field, ',')) {
        std::size_t used = 0;
        long long v = 0;
        try {
            v = std::stoll(tok, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != tok.size() || v < 0)
            throw InputError("bench grid entry '" + entry + "': bad integer '" + tok + "'");
        out.push_back(v);
    }
    if (out.empty())
        throw InputError("bench grid entry '" + entry + "' has an empty list");
    return out;
}

} // namespace

std::vector<BenchPoint> parse_grid(const std::string& text)
{
    std::vector<BenchPoint> grid;
    for (const auto& entry : split(text, ';')) {
        const auto parts = split(entry, ':');
        if (parts.size() < 3 || parts.size() > 4)
            throw InputError("bench grid entry '" + entry + "' must look like kind:C,...:d,...[:r,...]");
        const ModelKind kind = parse_kind(parts[0]);
        if (kind == ModelKind::Stats)
            throw InputError("bench grid entry '" + entry + "': stats is not a classifier");
        const auto cs = parse_ints(parts[1], entry);
        const auto ds = parse_ints(parts[2], entry);
        const auto rs = parts.size() == 4 ? parse_ints(parts[3], entry) : std::vector<long long>{0};
        if (kind == ModelKind::LrRgda && parts.size() != 4)
            throw InputError("bench grid entry '" + entry + "': lrrgda needs a rank list");
        for (auto c : cs)
            for (auto d : ds)
                for (auto r : rs)
                    grid.push_back({kind, static_cast<std::size_t>(c), static_cast<Index>(d),
                                    kind == ModelKind::LrRgda ? static_cast<Index>(r) : 0});
    }
    if (grid.empty())
        throw InputError("bench grid is empty");
    return grid;
}

std::uint64_t available_memory_bytes()
{
    std::ifstream in("/proc/meminfo");
    std::string key, unit;
    std::uint64_t value = 0;
    while (in >> key >> value >> unit)
        if (key == "MemAvailable:")
            return value * 1024;
    return 0;
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y)
{
    if (x.size() != y.size() || x.size() < 2)
        throw InputError("loglog_slope: need at least two matching points");
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double lx = std::log(x[i]), ly = std::log(y[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

namespace {

using Clock = std::chrono::steady_clock;

double median(std::vector<double> v)
{
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

Model build_point(const StatsSource& src, const BenchPoint& p, const BenchConfig& cfg)
{
    RegularizationParams params = cfg.params;
    params.priors.clear();
    Model m;
    m.kind = p.kind;
    switch (p.kind) {
    case ModelKind::Lda: m.clf = build_lda(src, params, cfg.lda_gamma); break;
    case ModelKind::Rgda: m.clf = build_rgda(src, params, cfg.threads); break;
    case ModelKind::LrRgda: {
        params.rank = p.rank;
        LrBuildOptions opt;
        opt.svd.randomized = cfg.randomized_svd;
        opt.svd.seed = cfg.seed;
        opt.threads = cfg.threads;
        m.clf = build_lr_rgda(src, params, opt);
        break;
    }
    case ModelKind::Sgd: {
        SgdConfig sgd;
        sgd.seed = cfg.seed;
        m.clf = train_sgd_baseline(src, params, sgd).classifier;
        break;
    }
    case ModelKind::Stats: throw InputError("stats is not a classifier");
    }
    return m;
}

BenchResult run_point(const BenchPoint& p, const BenchConfig& cfg)
{
    BenchResult res;
    res.kind = p.kind;
    res.classes = p.classes;
    res.dim = p.dim;
    res.rank = p.rank;
    res.param_bytes = storage_layout(p.kind, p.classes, static_cast<std::uint64_t>(p.dim),
                                     static_cast<std::uint64_t>(p.rank))
                          .total_bytes();

    // Parameters plus a few d x d work matrices.
    const std::uint64_t d = static_cast<std::uint64_t>(p.dim);
    const std::uint64_t need = res.param_bytes + 8 * d * d * 8;
    const std::uint64_t avail = available_memory_bytes();
    if (avail > 0 && static_cast<double>(need) > cfg.memory_fraction * static_cast<double>(avail)) {
        res.skipped = true;
        res.reason = "needs ~" + std::to_string(need >> 20) + " MiB, " + std::to_string(avail >> 20) +
                     " MiB available";
        return res;
    }

    try {
        const SyntheticStatsSource src(p.classes, p.dim, derive_seed(cfg.seed, "bench-stats", p.classes));
        std::vector<double> construct;
        std::optional<Model> model;
        for (int k = 0; k < std::max(1, cfg.construct_repeats); ++k) {
            model.reset();
            const auto t0 = Clock::now();
            model = build_point(src, p, cfg);
            construct.push_back(std::chrono::duration<double, std::milli>(Clock::now() - t0).count());
        }
        res.construct_ms = median(construct);

        Rng rng = make_rng(cfg.seed, "bench-queries");
        const RowMatrix x = standard_normal(cfg.batch, p.dim, rng);
        for (int k = 0; k < cfg.warmup; ++k)
            model->scores(x, cfg.threads);
        std::vector<double> per_batch;
        for (int k = 0; k < cfg.iters; ++k) {
            const auto t0 = Clock::now();
            const Matrix s = model->scores(x, cfg.threads);
            per_batch.push_back(std::chrono::duration<double, std::micro>(Clock::now() - t0).count());
            if (!s.allFinite())
                throw NumericalError("non-finite scores");
        }
        res.per_sample_us = median(per_batch) / static_cast<double>(cfg.batch);
        res.throughput = 1e6 / res.per_sample_us;
        if (cfg.count_flops) {
            FlopCounter fc;
            model->scores(x, 1, &fc);
            res.flops_per_sample = static_cast<double>(fc.multiply_adds) / static_cast<double>(cfg.batch);
        }
    } catch (const std::bad_alloc&) {
        res.skipped = true;
        res.reason = "allocation failed";
    } catch (const std::exception& e) {
        res.skipped = true;
        res.reason = e.what();
    }
    return res;
}

} // namespace

std::vector<BenchResult> run_bench(const std::vector<BenchPoint>& grid, const BenchConfig& cfg)
{
    if (cfg.iters < 3)
        throw InputError("bench needs at least 3 timed iterations, got " + std::to_string(cfg.iters));
    if (cfg.warmup < 0 || cfg.batch < 1)
        throw InputError("bench warmup must be >= 0 and batch >= 1");
    std::vector<BenchResult> out;
    out.reserve(grid.size());
    for (const auto& p : grid)
        out.push_back(run_point(p, cfg));
    return out;
}

std::string bench_csv(const std::vector<BenchResult>& results)
{
    std::ostringstream os;
    os.precision(10);
    os << "kind,C,d,r,construct_ms,per_sample_us,throughput_samples_per_s,param_bytes,flops_per_sample,status,reason\n";
    for (const auto& r : results) {
        std::string reason = r.reason;
        std::replace(reason.begin(), reason.end(), ',', ';');
        os << kind_name(r.kind) << ',' << r.classes << ',' << r.dim << ',' << r.rank << ',' << r.construct_ms << ','
           << r.per_sample_us << ',' << r.throughput << ',' << r.param_bytes << ',' << r.flops_per_sample << ','
           << (r.skipped ? "skipped" : "ok") << ',' << reason << '\n';
    }
    return os.str();
}

std::string bench_json(const std::vector<BenchResult>& results)
{
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& r : results) {
        nlohmann::ordered_json j = {
            {"kind", kind_name(r.kind)},
            {"C", r.classes},
            {"d", r.dim},
            {"r", r.rank},
            {"construct_ms", r.construct_ms},
            {"per_sample_us", r.per_sample_us},
            {"throughput_samples_per_s", r.throughput},
            {"param_bytes", r.param_bytes},
            {"flops_per_sample", r.flops_per_sample},
            {"status", r.skipped ? "skipped" : "ok"},
        };
        if (r.skipped)
            j["reason"] = r.reason;
        arr.push_back(std::move(j));
    }
    return arr.dump(2) + "\n";
}

std::string bench_gnuplot(const std::vector<BenchResult>& results)
{
    std::map<std::string, std::vector<const BenchResult*>> groups;
    for (const auto& r : results)
        if (!r.skipped)
            groups[kind_name(r.kind) + " d=" + std::to_string(r.dim) +
                   (r.kind == ModelKind::LrRgda ? " r=" + std::to_string(r.rank) : "")]
                .push_back(&r);
    std::ostringstream os;
    os.precision(10);
    bool first = true;
    for (auto& [label, rows] : groups) {
        if (!first)
            os << "\n\n";
        first = false;
        std::sort(rows.begin(), rows.end(), [](auto* a, auto* b) { return a->classes < b->classes; });
        os << "# " << label << "\n# classes log10_throughput\n";
        for (const auto* r : rows)
            os << r->classes << ' ' << std::log10(r->throughput) << '\n';
    }
    return os.str();
}

} // namespace lrgda
