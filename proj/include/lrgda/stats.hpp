#pragma once

#include "lrgda/types.hpp"

#include <map>
#include <vector>

namespace lrgda {

/// Finalized Gaussian moments of one class (biased, divide-by-n covariance).
struct GaussianClassStats {
    ClassId class_id = 0;
    Vector mu;
    Matrix sigma;
    std::uint64_t count = 0;

    Index dim() const { return mu.size(); }
    /// Single-sample classes have a zero covariance; usable only with alpha3 > 0.
    bool degenerate() const { return count < 2; }
};

/**
 * Read-only view over a collection of class statistics.
 *
 * Classifier builders consume this interface rather than a concrete registry
 * so that large synthetic collections can be generated class by class without
 * holding every d x d covariance in memory at once.
 */
class StatsSource {
public:
    virtual ~StatsSource() = default;

    virtual Index dim() const = 0;
    virtual std::size_t num_classes() const = 0;
    /// Class ids in ascending order; position i matches class_stats(i).
    virtual std::vector<ClassId> class_ids() const = 0;
    virtual GaussianClassStats class_stats(std::size_t i) const = 0;

    /// (1/C) sum_c Sigma_c as a running sum over classes.
    virtual Matrix average_covariance() const;
};

/// Running sums for one class, shifted by the first sample seen.
struct ClassAccumulator {
    std::uint64_t count = 0;
    Vector shift;      // reference point subtracted before summing
    Vector sum;        // sum (f - shift)
    Matrix sum_outer;  // sum (f - shift)(f - shift)^T
};

/**
 * Per-class Gaussian statistics accumulated from labeled feature batches.
 *
 * Sums are kept relative to a per-class shift (the first sample of the class)
 * so that Sigma = S2/n - (S1/n)(S1/n)^T does not cancel catastrophically for
 * features far from the origin; mathematically this is the same biased
 * estimator. Within a batch rows are combined by pairwise summation.
 *
 * Not thread-safe for writers.
 */
class StatsRegistry : public StatsSource {
public:
    explicit StatsRegistry(Index dim);

    Index dim() const override { return dim_; }
    std::size_t num_classes() const override { return entries_.size(); }
    std::vector<ClassId> class_ids() const override;
    GaussianClassStats class_stats(std::size_t i) const override;

    /// Adds a labeled batch. Throws InputError on missing labels or dim mismatch.
    void accumulate(const FeatureMatrix& batch);

    bool contains(ClassId id) const { return entries_.count(id) != 0; }
    bool empty() const { return entries_.empty(); }
    GaussianClassStats stats(ClassId id) const;

    /// Inserts or replaces a class from finalized stats (shift = mu, first moment 0).
    void set(const GaussianClassStats& s);
    /// Inserts or replaces a class from raw running sums.
    void set_accumulator(ClassId id, ClassAccumulator acc);
    const ClassAccumulator& accumulator(ClassId id) const;

    /// Classes holding a single sample; their covariance is identically zero.
    std::vector<ClassId> degenerate_classes() const;

    const std::map<ClassId, ClassAccumulator>& entries() const { return entries_; }

private:
    Index dim_;
    std::map<ClassId, ClassAccumulator> entries_;
};

GaussianClassStats finalize(ClassId id, const ClassAccumulator& acc);

/// (1/C) sum_c Sigma_c; throws InputError on an empty source.
Matrix average_covariance(const StatsSource& source);

/// Biased mean and covariance of the given rows; requires at least two rows.
GaussianClassStats reestimate_from_samples(const RowMatrix& samples, ClassId id = 0);

/// Adapter exposing an explicit list of finalized stats as a StatsSource.
class StatsList : public StatsSource {
public:
    explicit StatsList(std::vector<GaussianClassStats> stats);

    Index dim() const override { return dim_; }
    std::size_t num_classes() const override { return stats_.size(); }
    std::vector<ClassId> class_ids() const override;
    GaussianClassStats class_stats(std::size_t i) const override { return stats_[i]; }

private:
    Index dim_ = 0;
    std::vector<GaussianClassStats> stats_;
};

} // namespace lrgda
