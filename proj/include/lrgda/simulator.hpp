#pragma once

#include "lrgda/classifiers.hpp"
#include "lrgda/hopdc.hpp"
#include "lrgda/lr_rgda.hpp"
#include "lrgda/serialize.hpp"

#include <map>
#include <string>
#include <vector>

namespace lrgda {

enum class DriftKind { Identity, Translation, Linear, Tanh };

std::string drift_kind_name(DriftKind kind);
DriftKind parse_drift_kind(std::string_view name);

struct DriftSpec {
    DriftKind kind = DriftKind::Tanh;
    double magnitude = 5.0;           // translation: |v|
    std::string direction = "random"; // translation: "random" or "e1"
    double scale = 0.1;               // linear: |A|_2
    double eps = 1.5;                 // tanh: delta(x) = eps * tanh(W x)
    double w_norm = 1.0;              // tanh: |W|_2
};

/**
 * Synthetic class-incremental stream.
 *
 * Classes live in a fixed base space. Task t sees features phi_t(x), where
 * phi_1 is the identity and phi_{t+1} = g_t o phi_t with g_t(x) = x + delta_t(x)
 * drawn from `drift` at every task boundary.
 */
struct StreamSpec {
    Index tasks = 10;
    Index classes_per_task = 10;
    Index dim = 64;
    Index train_per_class = 200;
    Index test_per_class = 500;

    std::string layout = "sphere";  // "sphere" (random directions at `radius`) or "line" (along e1, `spacing` apart)
    double radius = 2.5;
    double spacing = 6.0;

    std::string covariance = "lowrank";  // "identity", "lowrank" (per-class rotation) or "shared"
    double variance = 1.0;               // identity scale, or leading eigenvalue of the low-rank spectrum
    Index effective_rank = 8;            // leading block size, values above dim mean full rank
    double decay = 0.8;                  // geometric decay of the leading spectrum
    double noise = 0.05;                 // eigenvalue floor outside the leading block

    DriftSpec drift;

    Index anchors = 1024;
    double anchor_overlap = 0.5;    // fraction of anchors drawn from seen classes
    double background_scale = 0.0; // std of the background component; 0 means radius / sqrt(dim) + 1
    bool supplement_anchors = true;

    void validate() const;
    Index num_classes() const { return tasks * classes_per_task; }
};

/// Assigns one key (optionally "drift.<field>") from its text value. Throws InputError on unknown keys.
void set_stream_field(StreamSpec& spec, const std::string& key, const std::string& value);
StreamSpec stream_spec_from_map(const std::map<std::string, std::string>& values);

struct TrueClass {
    ClassId id = 0;
    Index task = 0;  // 0-based
    Vector mu;
    Matrix sigma;
    Matrix root;     // sigma = root root^T
};

struct TaskStream {
    StreamSpec spec;
    std::uint64_t seed = 0;
    std::vector<TrueClass> classes;        // class id == index
    std::vector<DriftOracle> boundaries;   // tasks - 1 drift maps
    std::vector<RowMatrix> test_base;      // base-space test draws per class
    /// Analytic Bayes accuracy when it has a closed form (two classes, shared covariance); NaN otherwise.
    double bayes_accuracy = 0.0;

    /// phi_task(x) for a 0-based task index.
    RowMatrix embed(const RowMatrix& base, Index task) const;
    /// Base-space training draws of one class.
    RowMatrix train_base(ClassId id) const;
    RowMatrix anchor_base(Index boundary) const;
};

TaskStream generate_stream(const StreamSpec& spec, std::uint64_t seed);

/// Standard normal CDF.
double normal_cdf(double x);

struct PipelineConfig {
    ModelKind classifier = ModelKind::LrRgda;
    bool hopdc = true;
    RegularizationParams params;
    HopdcConfig hop;
    double lda_gamma = kDefaultLdaGamma;
    SgdConfig sgd;
    LowRankOptions svd;
    int threads = 1;
    bool include_timing = false;
};

struct RunReport {
    std::uint64_t seed = 0;
    std::vector<double> per_task;  // accuracy on all seen classes after each task
    double last = 0.0;
    double inc = 0.0;
    std::vector<double> build_ms;  // classifier construction time per task
    std::vector<double> eval_ms;
    double bayes_accuracy = 0.0;
};

/// Runs the incremental loop over one stream. The classifier rank is clamped to the dimension.
RunReport run_pipeline(const TaskStream& stream, const PipelineConfig& cfg);

struct MultiSeedReport {
    StreamSpec spec;
    PipelineConfig config;
    std::vector<RunReport> runs;
    double last_mean = 0.0, last_std = 0.0;
    double inc_mean = 0.0, inc_std = 0.0;
};

/// One stream and pipeline run per seed (base_seed, base_seed + 1, ...).
MultiSeedReport simulate(const StreamSpec& spec, const PipelineConfig& cfg, std::uint64_t base_seed,
                         std::size_t num_seeds);

/// Stable-order JSON rendering; timing fields only when cfg.include_timing is set.
std::string report_json(const MultiSeedReport& report);

} // namespace lrgda
