#include "lrgda/serialize.hpp"

#include "lrgda/io.hpp"

#include <algorithm>
#include <cctype>

namespace lrgda {

std::string kind_name(ModelKind kind)
{
    switch (kind) {
    case ModelKind::Lda: return "lda";
    case ModelKind::Rgda: return "rgda";
    case ModelKind::LrRgda: return "lrrgda";
    case ModelKind::Sgd: return "sgd";
    case ModelKind::Stats: return "stats";
    }
    return "unknown";
}

ModelKind parse_kind(std::string_view name)
{
    std::string s(name);
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char ch) { return std::tolower(ch); });
    if (s == "lda") return ModelKind::Lda;
    if (s == "rgda") return ModelKind::Rgda;
    if (s == "lrrgda" || s == "lr-rgda" || s == "lr_rgda") return ModelKind::LrRgda;
    if (s == "sgd") return ModelKind::Sgd;
    if (s == "stats") return ModelKind::Stats;
    throw InputError("unknown classifier kind '" + std::string(name) + "' (expected lda, rgda, lrrgda, sgd)");
}

namespace {

void put_header(std::string& out, ModelKind kind, std::size_t c, Index d, Index r, const std::vector<ClassId>& ids)
{
    out.append("GDA1", 4);
    put_u32(out, kGdaVersion);
    put_u32(out, static_cast<std::uint32_t>(kind));
    put_u32(out, static_cast<std::uint32_t>(c));
    put_u32(out, static_cast<std::uint32_t>(d));
    put_u32(out, static_cast<std::uint32_t>(r));
    for (ClassId id : ids)
        put_u32(out, id);
}

template <class M>
void put_matrix(std::string& out, const M& m)
{
    for (Index i = 0; i < m.rows(); ++i)
        for (Index j = 0; j < m.cols(); ++j)
            put_f64(out, m(i, j));
}

void put_vector(std::string& out, const Vector& v)
{
    for (Index i = 0; i < v.size(); ++i)
        put_f64(out, v(i));
}

// Bounds-checked sequential reader.
class Reader {
public:
    explicit Reader(std::string_view bytes) : bytes_(bytes) {}

    std::size_t offset() const { return off_; }

    void need(std::size_t n) const
    {
        if (bytes_.size() - off_ < n)
            throw InputError("GDA1: truncated at byte offset " + std::to_string(off_) + " (need " +
                             std::to_string(n) + " more bytes, file has " + std::to_string(bytes_.size()) + ")");
    }
    std::uint32_t u32()
    {
        need(4);
        const auto v = get_u32(bytes_, off_);
        off_ += 4;
        return v;
    }
    double f64()
    {
        need(8);
        const double v = get_f64(bytes_, off_);
        off_ += 8;
        return v;
    }
    template <class M>
    void matrix(M& m)
    {
        need(static_cast<std::size_t>(m.size()) * 8);
        for (Index i = 0; i < m.rows(); ++i)
            for (Index j = 0; j < m.cols(); ++j)
                m(i, j) = f64();
    }
    void vector(Vector& v)
    {
        need(static_cast<std::size_t>(v.size()) * 8);
        for (Index i = 0; i < v.size(); ++i)
            v(i) = f64();
    }
    void finish() const
    {
        if (off_ != bytes_.size())
            throw InputError("GDA1: " + std::to_string(bytes_.size() - off_) + " trailing bytes at byte offset " +
                             std::to_string(off_));
    }

private:
    std::string_view bytes_;
    std::size_t off_ = 0;
};

struct Decoded {
    GdaHeader header;
    std::vector<ClassId> ids;
};

Decoded read_header(Reader& rd, std::string_view bytes)
{
    if (bytes.size() < kGdaHeaderBytes)
        throw InputError("GDA1: truncated header (" + std::to_string(bytes.size()) + " bytes)");
    if (bytes.substr(0, 4) != "GDA1")
        throw InputError("GDA1: bad magic at byte offset 0");
    rd.u32();
    const auto version = rd.u32();
    if (version != kGdaVersion)
        throw InputError("GDA1: unsupported version " + std::to_string(version) + " at byte offset 4");
    Decoded out;
    const auto kind = rd.u32();
    if (kind < 1 || kind > 5)
        throw InputError("GDA1: unknown kind " + std::to_string(kind) + " at byte offset 8");
    out.header.kind = static_cast<ModelKind>(kind);
    out.header.num_classes = rd.u32();
    out.header.dim = rd.u32();
    out.header.rank = rd.u32();
    if (out.header.dim == 0)
        throw InputError("GDA1: zero dimension at byte offset 16");
    rd.need(4ull * out.header.num_classes);
    out.ids.resize(out.header.num_classes);
    for (auto& id : out.ids)
        id = rd.u32();
    for (std::size_t i = 1; i < out.ids.size(); ++i)
        if (out.ids[i] <= out.ids[i - 1])
            throw InputError("GDA1: class ids not strictly ascending at byte offset " +
                             std::to_string(kGdaHeaderBytes + 4 * i));
    return out;
}

// Compares the file size with the layout implied by the header before anything
// is allocated, so a corrupt header cannot request a huge buffer.
void check_size(const GdaHeader& h, std::string_view bytes)
{
    const std::uint64_t size = bytes.size();
    const std::uint64_t d = h.dim, c = h.num_classes;
    auto truncated = [&](std::uint64_t expected) {
        return InputError("GDA1: truncated " + kind_name(h.kind) + " payload at byte offset " +
                          std::to_string(size) + " (header implies " + std::to_string(expected) + " bytes)");
    };
    if (d > size / 8 || (c > 0 && c > size / (8 * d)) || (h.kind != ModelKind::Sgd && d > size / (8 * d)))
        throw truncated(0);
    const std::uint64_t expected = storage_layout(h.kind, c, d, h.rank).total_bytes();
    if (size < expected)
        throw truncated(expected);
    if (size > expected)
        throw InputError("GDA1: " + std::to_string(size - expected) + " trailing bytes at byte offset " +
                         std::to_string(expected));
}

} // namespace

GdaHeader peek_header(std::string_view bytes)
{
    Reader rd(bytes);
    return read_header(rd, bytes).header;
}

std::string encode_linear(const LinearClassifier& clf, ModelKind kind)
{
    if (kind != ModelKind::Lda && kind != ModelKind::Sgd)
        throw InputError("encode_linear: kind must be lda or sgd");
    const Index d = clf.dim();
    if (kind == ModelKind::Lda && clf.shared_precision.rows() != d)
        throw InputError("encode_linear: LDA model lacks its shared precision");
    std::string out;
    put_header(out, kind, clf.num_classes(), d, 0, clf.class_ids);
    if (kind == ModelKind::Lda)
        put_matrix(out, clf.shared_precision);
    put_matrix(out, clf.W);
    put_vector(out, clf.b);
    return out;
}

std::string encode_rgda(const RgdaClassifier& clf)
{
    std::string out;
    const Index d = clf.dim();
    put_header(out, ModelKind::Rgda, clf.num_classes(), d, 0, clf.class_ids);
    for (std::size_t i = 0; i < clf.num_classes(); ++i) {
        const Index ci = static_cast<Index>(i);
        put_matrix(out, clf.mu.row(ci));
        put_f64(out, clf.log_det(ci));
        put_f64(out, clf.log_prior(ci));
        put_matrix(out, clf.precision[i]);
    }
    return out;
}

std::string encode_lr_rgda(const LrRgdaClassifier& clf)
{
    std::string out;
    const Index d = clf.dim, r = clf.rank;
    put_header(out, ModelKind::LrRgda, clf.num_classes(), d, r, clf.class_ids);
    put_f64(out, clf.params.alpha1);
    put_f64(out, clf.params.alpha2);
    put_f64(out, clf.params.alpha3);
    put_f64(out, clf.log_det_b);
    put_matrix(out, clf.b_inv);
    for (std::size_t i = 0; i < clf.num_classes(); ++i) {
        const Index ci = static_cast<Index>(i);
        put_matrix(out, clf.W.row(ci));
        put_f64(out, clf.bias(ci));
        put_matrix(out, clf.P.middleRows(ci * r, r));
        put_matrix(out, clf.m_inv.middleRows(ci * r, r));
        put_matrix(out, clf.center.row(ci));
    }
    return out;
}

std::string encode_stats(const StatsRegistry& registry)
{
    std::string out;
    const Index d = registry.dim();
    put_header(out, ModelKind::Stats, registry.num_classes(), d, 0, registry.class_ids());
    for (const auto& [id, acc] : registry.entries()) {
        put_f64(out, static_cast<double>(acc.count));
        put_vector(out, acc.shift);
        put_vector(out, acc.sum);
        put_matrix(out, acc.sum_outer);
    }
    return out;
}

StatsRegistry decode_stats(std::string_view bytes)
{
    Reader rd(bytes);
    const Decoded h = read_header(rd, bytes);
    if (h.header.kind != ModelKind::Stats)
        throw InputError("expected a statistics file, found a " + kind_name(h.header.kind) + " classifier");
    check_size(h.header, bytes);
    const Index d = h.header.dim;
    StatsRegistry reg(d);
    for (ClassId id : h.ids) {
        ClassAccumulator acc;
        const std::size_t at = rd.offset();
        const double count = rd.f64();
        if (!(count >= 1) || count != std::floor(count))
            throw InputError("GDA1: invalid sample count for class " + std::to_string(id) + " at byte offset " +
                             std::to_string(at));
        acc.count = static_cast<std::uint64_t>(count);
        acc.shift.resize(d);
        acc.sum.resize(d);
        acc.sum_outer.resize(d, d);
        rd.vector(acc.shift);
        rd.vector(acc.sum);
        rd.matrix(acc.sum_outer);
        reg.set_accumulator(id, std::move(acc));
    }
    rd.finish();
    return reg;
}

Model decode_model(std::string_view bytes)
{
    Reader rd(bytes);
    const Decoded h = read_header(rd, bytes);
    const Index c = h.header.num_classes;
    const Index d = h.header.dim;
    const Index r = h.header.rank;
    if (h.header.kind == ModelKind::Stats)
        throw InputError("expected a classifier file, found statistics");
    if (h.header.kind == ModelKind::LrRgda && (r < 1 || r > d))
        throw InputError("GDA1: rank " + std::to_string(r) + " invalid for dimension " + std::to_string(d) +
                         " at byte offset 20");
    check_size(h.header, bytes);
    Model model;
    model.kind = h.header.kind;
    switch (h.header.kind) {
    case ModelKind::Lda:
    case ModelKind::Sgd: {
        LinearClassifier clf;
        clf.class_ids = h.ids;
        if (h.header.kind == ModelKind::Lda) {
            clf.shared_precision.resize(d, d);
            rd.matrix(clf.shared_precision);
        }
        clf.W.resize(c, d);
        clf.b.resize(c);
        rd.matrix(clf.W);
        rd.vector(clf.b);
        model.clf = std::move(clf);
        break;
    }
    case ModelKind::Rgda: {
        RgdaClassifier clf;
        clf.class_ids = h.ids;
        clf.mu.resize(c, d);
        clf.log_det.resize(c);
        clf.log_prior.resize(c);
        clf.precision.resize(static_cast<std::size_t>(c));
        for (Index i = 0; i < c; ++i) {
            Vector mu(d);
            rd.vector(mu);
            clf.mu.row(i) = mu.transpose();
            clf.log_det(i) = rd.f64();
            clf.log_prior(i) = rd.f64();
            clf.precision[static_cast<std::size_t>(i)].resize(d, d);
            rd.matrix(clf.precision[static_cast<std::size_t>(i)]);
        }
        model.clf = std::move(clf);
        break;
    }
    case ModelKind::LrRgda: {
        LrRgdaClassifier clf;
        clf.class_ids = h.ids;
        clf.dim = d;
        clf.rank = r;
        clf.params.alpha1 = rd.f64();
        clf.params.alpha2 = rd.f64();
        clf.params.alpha3 = rd.f64();
        clf.params.rank = r;
        clf.log_det_b = rd.f64();
        clf.b_inv.resize(d, d);
        rd.matrix(clf.b_inv);
        clf.W.resize(c, d);
        clf.bias.resize(c);
        clf.P.resize(c * r, d);
        clf.m_inv.resize(c * r, r);
        clf.center.resize(c, r);
        for (Index i = 0; i < c; ++i) {
            Vector w(d), center(r);
            rd.vector(w);
            clf.W.row(i) = w.transpose();
            clf.bias(i) = rd.f64();
            RowMatrix p(r, d);
            rd.matrix(p);
            clf.P.middleRows(i * r, r) = p;
            Matrix m(r, r);
            rd.matrix(m);
            clf.m_inv.middleRows(i * r, r) = m;
            rd.vector(center);
            clf.center.row(i) = center.transpose();
        }
        model.clf = std::move(clf);
        break;
    }
    case ModelKind::Stats:
        throw InputError("expected a classifier file, found statistics");
    }
    rd.finish();
    return model;
}

std::string encode_model(const Model& model)
{
    switch (model.kind) {
    case ModelKind::Lda:
    case ModelKind::Sgd: return encode_linear(std::get<LinearClassifier>(model.clf), model.kind);
    case ModelKind::Rgda: return encode_rgda(std::get<RgdaClassifier>(model.clf));
    case ModelKind::LrRgda: return encode_lr_rgda(std::get<LrRgdaClassifier>(model.clf));
    case ModelKind::Stats: break;
    }
    throw InputError("encode_model: not a classifier kind");
}

const std::vector<ClassId>& Model::class_ids() const
{
    return std::visit([](const auto& c) -> const std::vector<ClassId>& { return c.class_ids; }, clf);
}

Index Model::dim() const
{
    return std::visit(
        [](const auto& c) -> Index {
            if constexpr (std::is_same_v<std::decay_t<decltype(c)>, LrRgdaClassifier>)
                return c.dim;
            else
                return c.dim();
        },
        clf);
}

Matrix Model::scores(const RowMatrix& x, int threads, FlopCounter* flops) const
{
    return std::visit(
        [&](const auto& c) -> Matrix {
            if constexpr (std::is_same_v<std::decay_t<decltype(c)>, LinearClassifier>)
                return c.scores(x, flops);
            else
                return c.scores(x, threads, flops);
        },
        clf);
}

std::uint64_t StorageReport::per_class_bytes() const
{
    std::uint64_t total = 0;
    for (const auto& b : blocks)
        if (b.per_class)
            total += b.bytes;
    return total;
}

std::uint64_t StorageReport::shared_bytes() const
{
    std::uint64_t total = 0;
    for (const auto& b : blocks)
        if (!b.per_class)
            total += b.bytes;
    return total;
}

std::uint64_t StorageReport::total_bytes() const
{
    return header_bytes + per_class_bytes() + shared_bytes();
}

const StorageBlock& StorageReport::block(std::string_view name) const
{
    for (const auto& b : blocks)
        if (b.name == name)
            return b;
    throw InputError("storage report has no block '" + std::string(name) + "'");
}

StorageReport storage_layout(ModelKind kind, std::uint64_t c, std::uint64_t d, std::uint64_t r)
{
    StorageReport rep;
    rep.kind = kind;
    rep.num_classes = c;
    rep.dim = d;
    rep.rank = kind == ModelKind::LrRgda ? r : 0;
    rep.header_bytes = kGdaHeaderBytes + 4 * c;
    auto shared = [&](std::string name, std::uint64_t floats) {
        rep.blocks.push_back({std::move(name), floats, false, 8 * floats});
    };
    auto each = [&](std::string name, std::uint64_t floats) {
        rep.blocks.push_back({std::move(name), floats, true, 8 * floats * c});
    };
    switch (kind) {
    case ModelKind::Lda:
        shared("shared_precision", d * d);
        each("w", d);
        each("b", 1);
        break;
    case ModelKind::Sgd:
        each("w", d);
        each("b", 1);
        break;
    case ModelKind::Rgda:
        each("mu", d);
        each("log_det", 1);
        each("log_prior", 1);
        each("precision", d * d);
        break;
    case ModelKind::LrRgda:
        shared("alphas_log_det_B", 4);
        shared("B_inv", d * d);
        each("w", d);
        each("b", 1);
        each("P", r * d);
        each("M_inv", r * r);
        each("center", r);
        break;
    case ModelKind::Stats:
        each("count", 1);
        each("shift", d);
        each("sum", d);
        each("sum_outer", d * d);
        break;
    }
    return rep;
}

StorageReport storage_report(const Model& model)
{
    const std::uint64_t r =
        model.kind == ModelKind::LrRgda ? static_cast<std::uint64_t>(std::get<LrRgdaClassifier>(model.clf).rank) : 0;
    return storage_layout(model.kind, model.class_ids().size(), static_cast<std::uint64_t>(model.dim()), r);
}

} // namespace lrgda
