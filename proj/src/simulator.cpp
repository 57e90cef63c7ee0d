#include "lrgda/simulator.hpp"

#include "lrgda/linalg.hpp"
#include "lrgda/rng.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <cmath>
#include <limits>

namespace lrgda {

std::string drift_kind_name(DriftKind kind)
{
    switch (kind) {
    case DriftKind::Identity: return "identity";
    case DriftKind::Translation: return "translation";
    case DriftKind::Linear: return "linear";
    case DriftKind::Tanh: return "tanh";
    }
    return "unknown";
}

DriftKind parse_drift_kind(std::string_view name)
{
    if (name == "identity" || name == "none") return DriftKind::Identity;
    if (name == "translation" || name == "constant") return DriftKind::Translation;
    if (name == "linear") return DriftKind::Linear;
    if (name == "tanh") return DriftKind::Tanh;
    throw InputError("unknown drift kind '" + std::string(name) + "' (expected identity, translation, linear, tanh)");
}

void StreamSpec::validate() const
{
    auto fail = [](const std::string& msg) { throw InputError("stream spec: " + msg); };
    if (dim < 2) fail("dim must be >= 2");
    if (tasks < 1) fail("tasks must be >= 1");
    if (classes_per_task < 1) fail("classes_per_task must be >= 1");
    if (train_per_class < 2) fail("train_per_class must be >= 2");
    if (test_per_class < 1) fail("test_per_class must be >= 1");
    if (layout != "sphere" && layout != "line") fail("layout must be 'sphere' or 'line'");
    if (covariance != "identity" && covariance != "lowrank" && covariance != "shared")
        fail("covariance must be 'identity', 'lowrank' or 'shared'");
    if (!(variance > 0)) fail("variance must be positive");
    if (effective_rank < 1) fail("effective_rank must be >= 1");
    if (!(decay > 0) || decay > 1) fail("decay must lie in (0, 1]");
    if (noise < 0) fail("noise must be non-negative");
    if (covariance != "identity" && effective_rank < dim && !(noise > 0))
        fail("noise must be positive when effective_rank < dim");
    if (anchors < 1) fail("anchors must be >= 1");
    if (anchor_overlap < 0 || anchor_overlap > 1) fail("anchor_overlap must lie in [0, 1]");
    if (background_scale < 0) fail("background_scale must be non-negative");
    if (drift.direction != "random" && drift.direction != "e1") fail("drift.direction must be 'random' or 'e1'");
}

namespace {

double to_double(const std::string& key, const std::string& v)
{
    try {
        std::size_t used = 0;
        const double x = std::stod(v, &used);
        if (used != v.size())
            throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw InputError("stream spec: '" + key + "' expects a number, got '" + v + "'");
    }
}

Index to_index(const std::string& key, const std::string& v)
{
    const double x = to_double(key, v);
    if (x != std::floor(x))
        throw InputError("stream spec: '" + key + "' expects an integer, got '" + v + "'");
    return static_cast<Index>(x);
}

bool to_bool(const std::string& key, const std::string& v)
{
    if (v == "true" || v == "1" || v == "on") return true;
    if (v == "false" || v == "0" || v == "off") return false;
    throw InputError("stream spec: '" + key + "' expects true or false, got '" + v + "'");
}

std::string unquote(std::string v)
{
    if (v.size() >= 2 && (v.front() == '"' || v.front() == '\'') && v.back() == v.front())
        return v.substr(1, v.size() - 2);
    return v;
}

} // namespace

void set_stream_field(StreamSpec& s, const std::string& key, const std::string& raw)
{
    const std::string v = unquote(raw);
    if (key == "tasks") s.tasks = to_index(key, v);
    else if (key == "classes_per_task") s.classes_per_task = to_index(key, v);
    else if (key == "dim") s.dim = to_index(key, v);
    else if (key == "train_per_class") s.train_per_class = to_index(key, v);
    else if (key == "test_per_class") s.test_per_class = to_index(key, v);
    else if (key == "layout") s.layout = v;
    else if (key == "radius") s.radius = to_double(key, v);
    else if (key == "spacing") s.spacing = to_double(key, v);
    else if (key == "covariance") s.covariance = v;
    else if (key == "variance") s.variance = to_double(key, v);
    else if (key == "effective_rank") s.effective_rank = to_index(key, v);
    else if (key == "decay") s.decay = to_double(key, v);
    else if (key == "noise") s.noise = to_double(key, v);
    else if (key == "anchors") s.anchors = to_index(key, v);
    else if (key == "anchor_overlap") s.anchor_overlap = to_double(key, v);
    else if (key == "background_scale") s.background_scale = to_double(key, v);
    else if (key == "supplement_anchors") s.supplement_anchors = to_bool(key, v);
    else if (key == "drift.kind") s.drift.kind = parse_drift_kind(v);
    else if (key == "drift.magnitude") s.drift.magnitude = to_double(key, v);
    else if (key == "drift.direction") s.drift.direction = v;
    else if (key == "drift.scale") s.drift.scale = to_double(key, v);
    else if (key == "drift.eps") s.drift.eps = to_double(key, v);
    else if (key == "drift.w_norm") s.drift.w_norm = to_double(key, v);
    else throw InputError("stream spec: unknown key '" + key + "'");
}

StreamSpec stream_spec_from_map(const std::map<std::string, std::string>& values)
{
    StreamSpec spec;
    for (const auto& [k, v] : values)
        set_stream_field(spec, k, v);
    spec.validate();
    return spec;
}

double normal_cdf(double x)
{
    return 0.5 * std::erfc(-x / std::sqrt(2.0));
}

RowMatrix TaskStream::embed(const RowMatrix& base, Index task) const
{
    RowMatrix x = base;
    for (Index b = 0; b < task; ++b)
        x += boundaries[static_cast<std::size_t>(b)].apply(x);
    return x;
}

RowMatrix TaskStream::train_base(ClassId id) const
{
    const TrueClass& c = classes.at(id);
    Rng rng = make_rng(seed, "train", id);
    return (standard_normal(spec.train_per_class, spec.dim, rng) * c.root.transpose()).rowwise() + c.mu.transpose();
}

RowMatrix TaskStream::anchor_base(Index boundary) const
{
    const Index d = spec.dim;
    const Index seen = (boundary + 1) * spec.classes_per_task;
    const double bg = spec.background_scale > 0 ? spec.background_scale
                                                : spec.radius / std::sqrt(static_cast<double>(d)) + 1.0;
    Rng rng = make_rng(seed, "anchors", static_cast<std::uint64_t>(boundary));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<Index> pick(0, seen - 1);
    RowMatrix out(spec.anchors, d);
    for (Index i = 0; i < spec.anchors; ++i) {
        const bool from_class = unit(rng) < spec.anchor_overlap;
        const Index c = pick(rng);
        const RowMatrix z = standard_normal(1, d, rng);
        if (from_class)
            out.row(i) = z * classes[static_cast<std::size_t>(c)].root.transpose() +
                         classes[static_cast<std::size_t>(c)].mu.transpose();
        else
            out.row(i) = bg * z;
    }
    return out;
}

namespace {

DriftOracle make_boundary(const DriftSpec& ds, Index d, Rng& rng)
{
    switch (ds.kind) {
    case DriftKind::Identity: {
        DriftOracle o = constant_drift(Vector::Zero(d));
        o.name = "identity";
        return o;
    }
    case DriftKind::Translation: {
        Vector v = Vector::Zero(d);
        if (ds.direction == "e1")
            v(0) = 1.0;
        else
            v = standard_normal(d, 1, rng).col(0).normalized();
        return constant_drift(ds.magnitude * v);
    }
    case DriftKind::Linear: {
        const Matrix g = standard_normal(d, d, rng);
        return linear_drift(ds.scale / spectral_norm(g) * g);
    }
    case DriftKind::Tanh: {
        const Matrix g = standard_normal(d, d, rng);
        return tanh_drift(ds.eps, ds.w_norm / spectral_norm(g) * g);
    }
    }
    throw InputError("unknown drift kind");
}

} // namespace

TaskStream generate_stream(const StreamSpec& spec, std::uint64_t seed)
{
    spec.validate();
    const Index d = spec.dim;
    const Index n = spec.num_classes();
    TaskStream st;
    st.spec = spec;
    st.seed = seed;

    Vector spectrum(d);
    for (Index i = 0; i < d; ++i)
        spectrum(i) = i < spec.effective_rank ? spec.variance * std::pow(spec.decay, static_cast<double>(i))
                                              : spec.noise;
    Matrix shared_rotation;
    if (spec.covariance == "shared") {
        Rng rng = make_rng(seed, "rotation", 0);
        shared_rotation = random_orthogonal(d, rng);
    }

    Rng mean_rng = make_rng(seed, "means");
    for (Index j = 0; j < n; ++j) {
        TrueClass c;
        c.id = static_cast<ClassId>(j);
        c.task = j / spec.classes_per_task;
        if (spec.layout == "line") {
            c.mu = Vector::Zero(d);
            c.mu(0) = (static_cast<double>(j) - 0.5 * static_cast<double>(n - 1)) * spec.spacing;
        } else {
            c.mu = spec.radius * standard_normal(d, 1, mean_rng).col(0).normalized();
        }
        if (spec.covariance == "identity") {
            c.sigma = spec.variance * Matrix::Identity(d, d);
            c.root = std::sqrt(spec.variance) * Matrix::Identity(d, d);
        } else {
            Matrix rot;
            if (spec.covariance == "shared") {
                rot = shared_rotation;
            } else {
                Rng rng = make_rng(seed, "rotation", static_cast<std::uint64_t>(j) + 1);
                rot = random_orthogonal(d, rng);
            }
            c.root = rot * spectrum.cwiseSqrt().asDiagonal();
            c.sigma = symmetrize(c.root * c.root.transpose());
        }
        st.classes.push_back(std::move(c));
    }

    for (Index b = 0; b + 1 < spec.tasks; ++b) {
        Rng rng = make_rng(seed, "drift", static_cast<std::uint64_t>(b));
        st.boundaries.push_back(make_boundary(spec.drift, d, rng));
    }

    for (const auto& c : st.classes) {
        Rng rng = make_rng(seed, "test", c.id);
        st.test_base.push_back((standard_normal(spec.test_per_class, d, rng) * c.root.transpose()).rowwise() +
                               c.mu.transpose());
    }

    st.bayes_accuracy = std::numeric_limits<double>::quiet_NaN();
    if (n == 2 && spec.covariance != "lowrank") {
        const Vector diff = st.classes[0].mu - st.classes[1].mu;
        const double maha = std::sqrt(diff.dot(st.classes[0].sigma.llt().solve(diff)));
        st.bayes_accuracy = normal_cdf(0.5 * maha);
    }
    return st;
}

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0)
{
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

Model build_for_pipeline(const StatsSource& source, const PipelineConfig& cfg, const RegularizationParams& params,
                         std::uint64_t sgd_seed)
{
    Model m;
    m.kind = cfg.classifier;
    switch (cfg.classifier) {
    case ModelKind::Lda: m.clf = build_lda(source, params, cfg.lda_gamma); break;
    case ModelKind::Rgda: m.clf = build_rgda(source, params, cfg.threads); break;
    case ModelKind::LrRgda: {
        LrBuildOptions opt;
        opt.svd = cfg.svd;
        opt.threads = cfg.threads;
        m.clf = build_lr_rgda(source, params, opt);
        break;
    }
    case ModelKind::Sgd: {
        SgdConfig sgd = cfg.sgd;
        sgd.seed = sgd_seed;
        m.clf = train_sgd_baseline(source, params, sgd).classifier;
        break;
    }
    case ModelKind::Stats: throw InputError("stats is not a classifier kind");
    }
    return m;
}

} // namespace

RunReport run_pipeline(const TaskStream& stream, const PipelineConfig& cfg)
{
    const StreamSpec& spec = stream.spec;
    const Index d = spec.dim;
    RegularizationParams params = cfg.params;
    params.rank = std::min(params.rank, d);
    params.priors.clear();

    StatsRegistry registry(d);
    RunReport rep;
    rep.seed = stream.seed;
    rep.bayes_accuracy = stream.bayes_accuracy;

    for (Index t = 0; t < spec.tasks; ++t) {
        const Index first = t * spec.classes_per_task;
        const Index last = first + spec.classes_per_task;

        // Stage 2: move the stored statistics into the new representation.
        if (t > 0 && cfg.hopdc) {
            const RowMatrix a = stream.anchor_base(t - 1);
            RowMatrix extra_old(0, d), extra_new(0, d);
            if (spec.supplement_anchors) {
                RowMatrix cur(spec.classes_per_task * spec.train_per_class, d);
                for (Index j = first; j < last; ++j)
                    cur.middleRows((j - first) * spec.train_per_class, spec.train_per_class) =
                        stream.train_base(static_cast<ClassId>(j));
                extra_old = stream.embed(cur, t - 1);
                extra_new = stream.embed(cur, t);
            }
            const AnchorBank bank =
                build_anchor_bank(stream.embed(a, t - 1), stream.embed(a, t), extra_old, extra_new);
            HopdcConfig hop = cfg.hop;
            hop.seed = derive_seed(stream.seed ^ cfg.hop.seed, "hopdc", static_cast<std::uint64_t>(t));
            compensate_registry(registry, bank, hop, cfg.threads);
        }

        for (Index j = first; j < last; ++j) {
            const ClassId id = static_cast<ClassId>(j);
            registry.accumulate(FeatureMatrix(stream.embed(stream.train_base(id), t),
                                              std::vector<ClassId>(static_cast<std::size_t>(spec.train_per_class), id)));
        }

        auto t0 = Clock::now();
        const Model model =
            build_for_pipeline(registry, cfg, params, derive_seed(stream.seed, "sgd", static_cast<std::uint64_t>(t)));
        rep.build_ms.push_back(ms_since(t0));

        t0 = Clock::now();
        const auto& ids = model.class_ids();
        std::size_t correct = 0, total = 0;
        for (Index j = 0; j < last; ++j) {
            const Matrix s = model.scores(stream.embed(stream.test_base[static_cast<std::size_t>(j)], t), cfg.threads);
            for (Index pred : argmax_rows(s))
                correct += ids[static_cast<std::size_t>(pred)] == static_cast<ClassId>(j);
            total += static_cast<std::size_t>(s.rows());
        }
        rep.eval_ms.push_back(ms_since(t0));
        rep.per_task.push_back(static_cast<double>(correct) / static_cast<double>(total));
    }
    rep.last = rep.per_task.back();
    double sum = 0.0;
    for (double a : rep.per_task)
        sum += a;
    rep.inc = sum / static_cast<double>(rep.per_task.size());
    return rep;
}

namespace {

void mean_std(const std::vector<double>& xs, double& mean, double& sd)
{
    mean = 0.0;
    for (double x : xs)
        mean += x;
    mean /= static_cast<double>(xs.size());
    sd = 0.0;
    if (xs.size() < 2)
        return;
    for (double x : xs)
        sd += (x - mean) * (x - mean);
    sd = std::sqrt(sd / static_cast<double>(xs.size() - 1));
}

} // namespace

MultiSeedReport simulate(const StreamSpec& spec, const PipelineConfig& cfg, std::uint64_t base_seed,
                         std::size_t num_seeds)
{
    if (num_seeds == 0)
        throw InputError("simulate: need at least one seed");
    MultiSeedReport out;
    out.spec = spec;
    out.config = cfg;
    std::vector<double> lasts, incs;
    for (std::size_t k = 0; k < num_seeds; ++k) {
        const TaskStream stream = generate_stream(spec, base_seed + k);
        out.runs.push_back(run_pipeline(stream, cfg));
        lasts.push_back(out.runs.back().last);
        incs.push_back(out.runs.back().inc);
    }
    mean_std(lasts, out.last_mean, out.last_std);
    mean_std(incs, out.inc_mean, out.inc_std);
    return out;
}

std::string report_json(const MultiSeedReport& r)
{
    using nlohmann::ordered_json;
    const StreamSpec& s = r.spec;
    ordered_json stream = {
        {"tasks", s.tasks},
        {"classes_per_task", s.classes_per_task},
        {"dim", s.dim},
        {"train_per_class", s.train_per_class},
        {"test_per_class", s.test_per_class},
        {"layout", s.layout},
        {"radius", s.radius},
        {"spacing", s.spacing},
        {"covariance", s.covariance},
        {"variance", s.variance},
        {"effective_rank", s.effective_rank},
        {"decay", s.decay},
        {"noise", s.noise},
        {"anchors", s.anchors},
        {"anchor_overlap", s.anchor_overlap},
        {"background_scale", s.background_scale},
        {"supplement_anchors", s.supplement_anchors},
        {"drift",
         {{"kind", drift_kind_name(s.drift.kind)},
          {"magnitude", s.drift.magnitude},
          {"direction", s.drift.direction},
          {"scale", s.drift.scale},
          {"eps", s.drift.eps},
          {"w_norm", s.drift.w_norm}}},
    };
    const PipelineConfig& c = r.config;
    ordered_json pipeline = {
        {"classifier", kind_name(c.classifier)},
        {"hopdc", c.hopdc},
        {"alpha1", c.params.alpha1},
        {"alpha2", c.params.alpha2},
        {"alpha3", c.params.alpha3},
        {"rank", std::min(c.params.rank, s.dim)},
        {"tau", c.hop.tau},
        {"top_k", c.hop.top_k},
        {"m_samples", c.hop.m_samples},
        {"lda_gamma", c.lda_gamma},
        {"randomized_svd", c.svd.randomized},
    };
    ordered_json runs = ordered_json::array();
    ordered_json seeds = ordered_json::array();
    for (const auto& run : r.runs) {
        seeds.push_back(run.seed);
        ordered_json j = {{"seed", run.seed}, {"per_task", run.per_task}, {"last", run.last}, {"inc", run.inc}};
        if (std::isfinite(run.bayes_accuracy))
            j["bayes_accuracy"] = run.bayes_accuracy;
        if (c.include_timing)
            j["timing"] = {{"build_ms", run.build_ms}, {"eval_ms", run.eval_ms}};
        runs.push_back(std::move(j));
    }
    ordered_json root = {
        {"stream", stream},
        {"pipeline", pipeline},
        {"seeds", seeds},
        {"runs", runs},
        {"summary",
         {{"last_mean", r.last_mean}, {"last_std", r.last_std}, {"inc_mean", r.inc_mean}, {"inc_std", r.inc_std}}},
    };
    return root.dump(2) + "\n";
}

} // namespace lrgda
