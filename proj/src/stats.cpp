#include "lrgda/stats.hpp"

#include "lrgda/linalg.hpp"

#include <algorithm>

namespace lrgda {

namespace {

constexpr Index kPairwiseLeaf = 32;

// Pairwise sums of rows [begin, end) of x: first moment and Gram matrix.
void pairwise_moments(const RowMatrix& x, Index begin, Index end, Vector& sum, Matrix& gram)
{
    const Index n = end - begin;
    if (n <= kPairwiseLeaf) {
        const auto block = x.middleRows(begin, n);
        sum = block.colwise().sum().transpose();
        gram.noalias() = block.transpose() * block;
        return;
    }
    const Index mid = begin + n / 2;
    Vector sum_right;
    Matrix gram_right;
    pairwise_moments(x, begin, mid, sum, gram);
    pairwise_moments(x, mid, end, sum_right, gram_right);
    sum += sum_right;
    gram += gram_right;
}

} // namespace

Matrix StatsSource::average_covariance() const
{
    const std::size_t c = num_classes();
    if (c == 0)
        throw InputError("average_covariance: no classes");
    Matrix acc = Matrix::Zero(dim(), dim());
    for (std::size_t i = 0; i < c; ++i)
        acc += class_stats(i).sigma;
    return symmetrize(acc / static_cast<double>(c));
}

Matrix average_covariance(const StatsSource& source)
{
    return source.average_covariance();
}

StatsRegistry::StatsRegistry(Index dim) : dim_(dim)
{
    if (dim < 1)
        throw InputError("StatsRegistry: dimension must be >= 1");
}

std::vector<ClassId> StatsRegistry::class_ids() const
{
    std::vector<ClassId> ids;
    ids.reserve(entries_.size());
    for (const auto& [id, _] : entries_)
        ids.push_back(id);
    return ids;
}

GaussianClassStats StatsRegistry::class_stats(std::size_t i) const
{
    auto it = entries_.begin();
    std::advance(it, static_cast<std::ptrdiff_t>(i));
    return finalize(it->first, it->second);
}

void StatsRegistry::accumulate(const FeatureMatrix& batch)
{
    batch.validate();
    if (!batch.has_labels())
        throw InputError("accumulate: batch has no labels");
    if (batch.cols() != dim_)
        throw InputError("accumulate: batch has " + std::to_string(batch.cols()) + " columns, registry dim is " +
                         std::to_string(dim_));

    std::map<ClassId, std::vector<Index>> rows_by_class;
    const auto& labels = *batch.labels;
    for (Index i = 0; i < batch.rows(); ++i)
        rows_by_class[labels[static_cast<std::size_t>(i)]].push_back(i);

    for (const auto& [id, rows] : rows_by_class) {
        auto& acc = entries_[id];
        if (acc.count == 0) {
            acc.shift = batch.data.row(rows.front()).transpose();
            acc.sum = Vector::Zero(dim_);
            acc.sum_outer = Matrix::Zero(dim_, dim_);
        }
        RowMatrix centered(static_cast<Index>(rows.size()), dim_);
        for (std::size_t k = 0; k < rows.size(); ++k)
            centered.row(static_cast<Index>(k)) = batch.data.row(rows[k]) - acc.shift.transpose();
        Vector s;
        Matrix g;
        pairwise_moments(centered, 0, centered.rows(), s, g);
        acc.sum += s;
        acc.sum_outer += g;
        acc.count += rows.size();
    }
}

GaussianClassStats finalize(ClassId id, const ClassAccumulator& acc)
{
    if (acc.count == 0)
        throw InputError("class " + std::to_string(id) + " has no samples");
    const double n = static_cast<double>(acc.count);
    const Vector mean_offset = acc.sum / n;
    GaussianClassStats out;
    out.class_id = id;
    out.count = acc.count;
    out.mu = acc.shift + mean_offset;
    out.sigma = symmetrize(acc.sum_outer / n - mean_offset * mean_offset.transpose());
    return out;
}

GaussianClassStats StatsRegistry::stats(ClassId id) const
{
    return finalize(id, accumulator(id));
}

const ClassAccumulator& StatsRegistry::accumulator(ClassId id) const
{
    auto it = entries_.find(id);
    if (it == entries_.end())
        throw InputError("unknown class id " + std::to_string(id));
    return it->second;
}

void StatsRegistry::set(const GaussianClassStats& s)
{
    if (s.mu.size() != dim_ || s.sigma.rows() != dim_ || s.sigma.cols() != dim_)
        throw InputError("set: stats for class " + std::to_string(s.class_id) + " have dim " +
                         std::to_string(s.mu.size()) + ", registry dim is " + std::to_string(dim_));
    if (s.count == 0)
        throw InputError("set: class " + std::to_string(s.class_id) + " has zero count");
    ClassAccumulator acc;
    acc.count = s.count;
    acc.shift = s.mu;
    acc.sum = Vector::Zero(dim_);
    acc.sum_outer = static_cast<double>(s.count) * s.sigma;
    entries_[s.class_id] = std::move(acc);
}

void StatsRegistry::set_accumulator(ClassId id, ClassAccumulator acc)
{
    if (acc.shift.size() != dim_ || acc.sum.size() != dim_ || acc.sum_outer.rows() != dim_ ||
        acc.sum_outer.cols() != dim_)
        throw InputError("set_accumulator: class " + std::to_string(id) + " has wrong dimension");
    if (acc.count == 0)
        throw InputError("set_accumulator: class " + std::to_string(id) + " has zero count");
    entries_[id] = std::move(acc);
}

std::vector<ClassId> StatsRegistry::degenerate_classes() const
{
    std::vector<ClassId> out;
    for (const auto& [id, acc] : entries_)
        if (acc.count < 2)
            out.push_back(id);
    return out;
}

GaussianClassStats reestimate_from_samples(const RowMatrix& samples, ClassId id)
{
    if (samples.rows() < 2)
        throw InputError("reestimate_from_samples: need at least 2 rows, got " + std::to_string(samples.rows()));
    StatsRegistry reg(samples.cols());
    reg.accumulate(FeatureMatrix(samples, std::vector<ClassId>(static_cast<std::size_t>(samples.rows()), id)));
    return reg.stats(id);
}

StatsList::StatsList(std::vector<GaussianClassStats> stats) : stats_(std::move(stats))
{
    std::sort(stats_.begin(), stats_.end(),
              [](const auto& a, const auto& b) { return a.class_id < b.class_id; });
    for (std::size_t i = 1; i < stats_.size(); ++i)
        if (stats_[i].class_id == stats_[i - 1].class_id)
            throw InputError("StatsList: duplicate class id " + std::to_string(stats_[i].class_id));
    if (!stats_.empty())
        dim_ = stats_.front().dim();
    for (const auto& s : stats_)
        if (s.dim() != dim_)
            throw InputError("StatsList: mixed dimensions");
}

std::vector<ClassId> StatsList::class_ids() const
{
    std::vector<ClassId> ids;
    for (const auto& s : stats_)
        ids.push_back(s.class_id);
    return ids;
}

} // namespace lrgda
