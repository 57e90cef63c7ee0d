// lrgda command-line tool: fit-stats, build, predict, compensate, simulate, bench.

#include "lrgda/bench.hpp"
#include "lrgda/hopdc.hpp"
#include "lrgda/io.hpp"
#include "lrgda/serialize.hpp"
#include "lrgda/simulator.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <charconv>
#include <iostream>

using namespace lrgda;

namespace {

constexpr int kExitInput = 2;
constexpr int kExitNumerical = 3;

struct RegOpts {
    double alpha1 = 0.2, alpha2 = 2.0, alpha3 = 0.5;
    Index rank = 64;
    std::vector<double> priors;

    void add(CLI::App* app, bool with_rank = true)
    {
        app->add_option("--alpha1", alpha1, "Weight of the class covariance");
        app->add_option("--alpha2", alpha2, "Weight of the average covariance");
        app->add_option("--alpha3", alpha3, "Ridge added to the diagonal");
        if (with_rank)
            app->add_option("--rank", rank, "Rank of the class-specific update (lrrgda)");
    }
    RegularizationParams params() const
    {
        RegularizationParams p;
        p.alpha1 = alpha1;
        p.alpha2 = alpha2;
        p.alpha3 = alpha3;
        p.rank = rank;
        p.priors = priors;
        return p;
    }
};

std::string fmt(double v)
{
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

void write_or_print(const std::string& path, const std::string& text)
{
    if (path.empty() || path == "-")
        std::cout << text;
    else
        write_file(path, text);
}

// fit-stats ------------------------------------------------------------------

struct FitStatsCmd {
    std::vector<std::string> inputs;
    std::string out;

    int run() const
    {
        std::optional<StatsRegistry> reg;
        for (const auto& path : inputs) {
            FeatureMatrix m;
            try {
                m = read_features(path);
            } catch (const InputError& e) {
                throw InputError(path + ": " + e.what());
            }
            if (m.rows() == 0)
                throw InputError(path + ": zero rows");
            if (!m.has_labels())
                throw InputError(path + ": features have no labels");
            if (!reg)
                reg.emplace(m.cols());
            reg->accumulate(m);
        }
        write_file(out, encode_stats(*reg));
        for (const auto& [id, acc] : reg->entries())
            std::cout << "class " << id << ": " << acc.count << " samples" << (acc.count < 2 ? " (single sample)" : "")
                      << "\n";
        return 0;
    }
};

// build ----------------------------------------------------------------------

struct BuildCmd {
    std::string stats, out, kind = "lrrgda";
    RegOpts reg;
    double gamma = kDefaultLdaGamma;
    bool randomized = false;
    std::size_t batch_classes = 12;
    int threads = 1;
    std::uint64_t seed = 0;

    int run() const
    {
        const StatsRegistry registry = decode_stats(read_file(stats));
        const ModelKind k = parse_kind(kind);
        RegularizationParams p = reg.params();
        Model model;
        model.kind = k;
        switch (k) {
        case ModelKind::Lda: model.clf = build_lda(registry, p, gamma); break;
        case ModelKind::Rgda: {
            RgdaClassifier clf = build_rgda(registry, p, threads);
            for (ClassId id : clf.fallback_classes)
                std::cerr << "warning: class " << id << " needed the eigenvalue-clipping fallback\n";
            model.clf = std::move(clf);
            break;
        }
        case ModelKind::LrRgda: {
            LrBuildOptions opt;
            opt.svd.randomized = randomized;
            opt.svd.seed = seed;
            opt.batch_classes = batch_classes;
            opt.threads = threads;
            model.clf = build_lr_rgda(registry, p, opt);
            break;
        }
        case ModelKind::Sgd: {
            SgdConfig cfg;
            cfg.seed = seed;
            const SgdResult r = train_sgd_baseline(registry, p, cfg);
            std::cout << "sgd: " << r.steps_run << " of " << r.planned_steps << " steps, final loss "
                      << fmt(r.final_loss) << "\n";
            model.clf = r.classifier;
            break;
        }
        case ModelKind::Stats: throw InputError("--kind must be a classifier kind");
        }
        write_file(out, encode_model(model));
        const StorageReport rep = storage_report(model);
        std::cout << kind_name(k) << ": C=" << rep.num_classes << " d=" << rep.dim << " r=" << rep.rank
                  << " bytes=" << rep.total_bytes() << "\n";
        for (const auto& b : rep.blocks)
            std::cout << "  " << b.name << (b.per_class ? " (per class)" : " (shared)") << ": " << b.bytes
                      << " bytes\n";
        return 0;
    }
};

// predict --------------------------------------------------------------------

struct PredictCmd {
    std::string model, input, out;
    int threads = 1;

    int run() const
    {
        const Model m = decode_model(read_file(model));
        const FeatureMatrix x = read_features(input);
        const Matrix s = m.scores(x.data, threads);
        const auto pred = argmax_rows(s);
        std::string text = "row,pred,score\n";
        const auto& ids = m.class_ids();
        for (Index i = 0; i < s.rows(); ++i) {
            const Index c = pred[static_cast<std::size_t>(i)];
            text += std::to_string(i) + "," + std::to_string(ids[static_cast<std::size_t>(c)]) + "," + fmt(s(i, c)) +
                    "\n";
        }
        write_or_print(out, text);
        return 0;
    }
};

// compensate -----------------------------------------------------------------

DriftOracle parse_oracle(const std::string& spec, Index d)
{
    const auto colon = spec.find(':');
    const std::string kind = spec.substr(0, colon);
    const std::string arg = colon == std::string::npos ? "" : spec.substr(colon + 1);
    auto number = [&](const std::string& s) {
        double v = 0;
        auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || p != s.data() + s.size())
            throw InputError("--drift-oracle: bad number '" + s + "' in '" + spec + "'");
        return v;
    };
    if (kind == "scale") {
        DriftOracle o = linear_drift(number(arg) * Matrix::Identity(d, d));
        o.name = spec;
        return o;
    }
    if (kind == "constant") {
        DriftOracle o = constant_drift(Vector::Constant(d, arg.empty() ? 0.0 : number(arg)));
        o.name = spec;
        return o;
    }
    if (kind == "matrix") {
        const FeatureMatrix a = read_features(arg);
        if (a.rows() != d || a.cols() != d)
            throw InputError("--drift-oracle matrix is " + shape_str(a.rows(), a.cols()) + ", expected " +
                             shape_str(d, d));
        DriftOracle o = linear_drift(a.data);
        o.name = spec;
        return o;
    }
    throw InputError("--drift-oracle must be scale:<s>, constant:<c> or matrix:<file>, got '" + spec + "'");
}

struct CompensateCmd {
    std::string stats, f_old, f_new, sup_old, sup_new, out;
    double tau = 0.05;
    Index topk = 400, samples = 256;
    std::uint64_t seed = 0;
    int threads = 1;
    bool verify = false;
    std::string oracle, bound_report;

    int run() const
    {
        StatsRegistry reg = decode_stats(read_file(stats));
        const FeatureMatrix a_old = read_features(f_old);
        const FeatureMatrix a_new = read_features(f_new);
        RowMatrix s_old(0, a_old.cols()), s_new(0, a_new.cols());
        if (!sup_old.empty() || !sup_new.empty()) {
            if (sup_old.empty() || sup_new.empty())
                throw InputError("--supplement-old and --supplement-new must be given together");
            s_old = read_features(sup_old).data;
            s_new = read_features(sup_new).data;
            if (s_old.rows() != s_new.rows())
                throw InputError("supplement anchors differ in row count");
        }
        const AnchorBank bank = build_anchor_bank(a_old.data, a_new.data, s_old, s_new);
        if (bank.dim() != reg.dim())
            throw InputError("anchors have dim " + std::to_string(bank.dim()) + ", statistics have " +
                             std::to_string(reg.dim()));
        HopdcConfig cfg;
        cfg.tau = tau;
        cfg.top_k = topk;
        cfg.m_samples = samples;
        cfg.seed = seed;
        cfg.validate();
        if (verify && oracle.empty())
            throw InputError("--verify-bounds needs --drift-oracle");

        const auto ids = reg.class_ids();
        std::vector<GaussianClassStats> updated(ids.size());
        std::vector<RowMatrix> draws(ids.size());
        parallel_for(ids.size(), threads, [&](std::size_t i) {
            updated[i] = compensate_class(reg.stats(ids[i]), bank, cfg, verify ? &draws[i] : nullptr);
        });
        for (const auto& s : updated)
            reg.set(s);
        write_file(out, encode_stats(reg));
        std::cout << "compensated " << ids.size() << " classes with " << bank.size() << " anchors (k="
                  << cfg.effective_k(bank.size()) << ", tau=" << fmt(tau) << ")\n";

        if (!verify)
            return 0;
        const DriftOracle o = parse_oracle(oracle, bank.dim());
        const double consistency = (bank.drift - o.apply(bank.keys)).rowwise().norm().maxCoeff();
        Index rows = 0;
        for (const auto& d : draws)
            rows += d.rows();
        RowMatrix queries(rows, bank.dim());
        rows = 0;
        for (const auto& d : draws) {
            queries.middleRows(rows, d.rows()) = d;
            rows += d.rows();
        }
        const BoundReport rep = verify_error_bound(bank, o, queries, cfg);
        nlohmann::ordered_json j = {
            {"oracle", rep.oracle},
            {"lipschitz", rep.lipschitz},
            {"tau", rep.tau},
            {"k", rep.k},
            {"anchors", rep.anchors},
            {"queries", rep.queries},
            {"anchor_consistency", consistency},
            {"weighted_violations", rep.weighted_violations},
            {"temperature_violations", rep.temperature_violations},
            {"max_error", rep.max_error},
            {"min_weighted_slack", rep.min_weighted_slack},
            {"min_temperature_slack", rep.min_temperature_slack},
            {"tolerance", rep.tolerance},
        };
        write_or_print(bound_report, j.dump(2) + "\n");
        if (consistency > 1e-9)
            std::cerr << "warning: anchor drifts differ from the declared oracle by up to " << consistency
                      << "; the bounds assume unit-norm anchors with drift equal to the oracle\n";
        if (!rep.ok()) {
            std::cerr << "error bound violated for " << rep.weighted_violations + rep.temperature_violations
                      << " checks\n";
            return kExitNumerical;
        }
        return 0;
    }
};

// simulate -------------------------------------------------------------------

StreamSpec read_stream_spec(const std::string& path)
{
    if (path.empty())
        return StreamSpec{};
    std::vector<CLI::ConfigItem> items;
    try {
        items = CLI::ConfigTOML().from_file(path);
    } catch (const CLI::Error& e) {
        throw InputError("spec file '" + path + "': " + e.what());
    }
    std::map<std::string, std::string> values;
    for (const auto& item : items) {
        if (item.name == "++" || item.name == "--")
            continue;
        std::string key;
        for (const auto& p : item.parents)
            key += p + ".";
        key += item.name;
        if (item.inputs.size() != 1)
            throw InputError("spec file '" + path + "': key '" + key + "' needs exactly one value");
        values[key] = item.inputs.front();
    }
    return stream_spec_from_map(values);
}

struct SimulateCmd {
    std::string spec, classifier = "lrrgda", hopdc = "on", out;
    std::size_t seeds = 1;
    std::uint64_t seed = 0;
    RegOpts reg;
    double tau = 0.05, gamma = kDefaultLdaGamma;
    Index topk = 400, samples = 256;
    bool randomized = false, timing = false;
    int threads = 1;

    int run() const
    {
        const StreamSpec s = read_stream_spec(spec);
        PipelineConfig cfg;
        cfg.classifier = parse_kind(classifier);
        if (cfg.classifier == ModelKind::Stats)
            throw InputError("--classifier must be lda, rgda, lrrgda or sgd");
        cfg.hopdc = hopdc == "on";
        cfg.params = reg.params();
        cfg.hop.tau = tau;
        cfg.hop.top_k = topk;
        cfg.hop.m_samples = samples;
        cfg.hop.validate();
        cfg.lda_gamma = gamma;
        cfg.svd.randomized = randomized;
        cfg.threads = threads;
        cfg.include_timing = timing;
        write_or_print(out, report_json(simulate(s, cfg, seed, seeds)));
        return 0;
    }
};

// bench ----------------------------------------------------------------------

struct BenchCmd {
    std::string grid = "lda:100,200,400,800:768;rgda:100,200,400,800:768;lrrgda:100,200,400,800:768:16";
    std::string out = "bench.csv", json, gnuplot;
    int warmup = 3, iters = 5, threads = 1, repeats = 1;
    Index batch = 64;
    std::uint64_t seed = 0;
    bool flops = false, exact_svd = false;

    int run() const
    {
        BenchConfig cfg;
        cfg.warmup = warmup;
        cfg.iters = iters;
        cfg.threads = threads;
        cfg.construct_repeats = repeats;
        cfg.batch = batch;
        cfg.seed = seed;
        cfg.count_flops = flops;
        cfg.randomized_svd = !exact_svd;
        const auto results = run_bench(parse_grid(grid), cfg);
        write_file(out, bench_csv(results));
        if (!json.empty())
            write_file(json, bench_json(results));
        if (!gnuplot.empty())
            write_file(gnuplot, bench_gnuplot(results));
        for (const auto& r : results) {
            std::cout << kind_name(r.kind) << " C=" << r.classes << " d=" << r.dim;
            if (r.kind == ModelKind::LrRgda)
                std::cout << " r=" << r.rank;
            if (r.skipped)
                std::cout << " skipped: " << r.reason << "\n";
            else
                std::cout << " construct " << fmt(r.construct_ms) << " ms, " << fmt(r.throughput)
                          << " samples/s\n";
        }
        return 0;
    }
};

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Analytic Gaussian classifiers and drift compensation for class-incremental learning"};
    app.option_defaults()->always_capture_default();
    app.set_config("--config", "", "TOML file with option values (command-line flags take precedence)");
    app.require_subcommand(1);

    FitStatsCmd fit;
    auto* fit_app = app.add_subcommand("fit-stats", "Accumulate per-class Gaussian statistics from labeled features");
    fit_app->add_option("inputs", fit.inputs, "Labeled FMX1 or CSV feature files")->required();
    fit_app->add_option("-o,--out", fit.out, "Output statistics file (GDA1)")->required();

    BuildCmd build;
    auto* build_app = app.add_subcommand("build", "Build a classifier from a statistics file");
    build_app->add_option("--stats", build.stats, "Statistics file from fit-stats or compensate")->required();
    build_app->add_option("-o,--out", build.out, "Output classifier file (GDA1)")->required();
    build_app->add_option("--kind", build.kind, "Classifier kind")
        ->check(CLI::IsMember({"lda", "rgda", "lrrgda", "sgd"}));
    build.reg.add(build_app);
    build_app->add_option("--priors", build.reg.priors, "Class priors in ascending class-id order (default uniform)");
    build_app->add_option("--gamma", build.gamma, "LDA shrinkage towards the identity");
    build_app->add_flag("--randomized-svd", build.randomized, "Randomized range finder for the top-r spectrum");
    build_app->add_option("--batch-classes", build.batch_classes, "Classes per construction batch (lrrgda)");
    build_app->add_option("--threads", build.threads, "Worker threads")->check(CLI::PositiveNumber);
    build_app->add_option("--seed", build.seed, "Seed for randomized SVD and SGD");

    PredictCmd predict;
    auto* predict_app = app.add_subcommand("predict", "Score features and write row,pred,score CSV");
    predict_app->add_option("--model", predict.model, "Classifier file")->required();
    predict_app->add_option("--input", predict.input, "FMX1 or CSV features")->required();
    predict_app->add_option("-o,--out", predict.out, "Output CSV (stdout if omitted)");
    predict_app->add_option("--threads", predict.threads, "Worker threads")->check(CLI::PositiveNumber);

    CompensateCmd comp;
    auto* comp_app = app.add_subcommand("compensate", "Move class statistics to a new representation with HopDC");
    comp_app->add_option("--stats", comp.stats, "Statistics under the old representation")->required();
    comp_app->add_option("--old", comp.f_old, "Anchor features, old representation")->required();
    comp_app->add_option("--new", comp.f_new, "Anchor features, new representation")->required();
    comp_app->add_option("--supplement-old", comp.sup_old, "Extra anchors (current task), old representation");
    comp_app->add_option("--supplement-new", comp.sup_new, "Extra anchors (current task), new representation");
    comp_app->add_option("-o,--out", comp.out, "Output statistics file")->required();
    comp_app->add_option("--tau", comp.tau, "Attention temperature");
    comp_app->add_option("--topk", comp.topk, "Anchors kept per query (clamped to the anchor count)");
    comp_app->add_option("--samples", comp.samples, "Pseudo-features drawn per class");
    comp_app->add_option("--seed", comp.seed, "Sampling seed");
    comp_app->add_option("--threads", comp.threads, "Worker threads")->check(CLI::PositiveNumber);
    comp_app->add_flag("--verify-bounds", comp.verify, "Check the drift error bounds (test mode)");
    comp_app->add_option("--drift-oracle", comp.oracle, "Declared drift: scale:<s>, constant:<c> or matrix:<file>");
    comp_app->add_option("--bound-report", comp.bound_report, "JSON bound report (stdout if omitted)");

    SimulateCmd sim;
    auto* sim_app = app.add_subcommand("simulate", "Run the incremental pipeline on a synthetic drifting stream");
    sim_app->add_option("--spec", sim.spec, "Stream spec (TOML); built-in defaults if omitted");
    sim_app->add_option("--classifier", sim.classifier, "Classifier kind")
        ->check(CLI::IsMember({"lda", "rgda", "lrrgda", "sgd"}));
    sim_app->add_option("--hopdc", sim.hopdc, "Drift compensation")->check(CLI::IsMember({"on", "off"}));
    sim_app->add_option("--seeds", sim.seeds, "Number of seeds (seed, seed+1, ...)")->check(CLI::PositiveNumber);
    sim_app->add_option("--seed", sim.seed, "First seed");
    sim_app->add_option("-o,--out", sim.out, "Report JSON (stdout if omitted)");
    sim.reg.add(sim_app);
    sim_app->add_option("--gamma", sim.gamma, "LDA shrinkage towards the identity");
    sim_app->add_option("--tau", sim.tau, "Attention temperature");
    sim_app->add_option("--topk", sim.topk, "Anchors kept per query");
    sim_app->add_option("--samples", sim.samples, "Pseudo-features drawn per class");
    sim_app->add_flag("--randomized-svd", sim.randomized, "Randomized range finder for the top-r spectrum");
    sim_app->add_flag("--timing", sim.timing, "Include wall-clock timings (makes the report non-reproducible)");
    sim_app->add_option("--threads", sim.threads, "Worker threads")->check(CLI::PositiveNumber);

    BenchCmd bench;
    auto* bench_app = app.add_subcommand("bench", "Construction time, storage and throughput sweep");
    bench_app->add_option("--grid", bench.grid, "kind:C,...:d,...[:r,...] entries separated by ';'");
    bench_app->add_option("--warmup", bench.warmup, "Untimed scoring rounds")->check(CLI::NonNegativeNumber);
    bench_app->add_option("--iters", bench.iters, "Timed scoring rounds (median reported)")->check(CLI::Range(3, 1000000));
    bench_app->add_option("--batch", bench.batch, "Rows per scoring call")->check(CLI::PositiveNumber);
    bench_app->add_option("--construct-repeats", bench.repeats, "Timed constructions per point")->check(CLI::PositiveNumber);
    bench_app->add_option("--seed", bench.seed, "Seed for synthetic statistics and queries");
    bench_app->add_option("--threads", bench.threads, "Worker threads")->check(CLI::PositiveNumber);
    bench_app->add_option("-o,--out", bench.out, "CSV output");
    bench_app->add_option("--json", bench.json, "Optional JSON output");
    bench_app->add_option("--gnuplot", bench.gnuplot, "Optional gnuplot data (classes vs log10 throughput)");
    bench_app->add_flag("--flops", bench.flops, "Record instrumented multiply-adds per sample");
    bench_app->add_flag("--exact-svd", bench.exact_svd, "Full eigendecomposition instead of the randomized one");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitInput;
    }

    try {
        if (fit_app->parsed()) return fit.run();
        if (build_app->parsed()) return build.run();
        if (predict_app->parsed()) return predict.run();
        if (comp_app->parsed()) return comp.run();
        if (sim_app->parsed()) return sim.run();
        if (bench_app->parsed()) return bench.run();
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return kExitInput;
}
