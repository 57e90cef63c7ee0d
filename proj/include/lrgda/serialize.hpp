#pragma once

#include "lrgda/classifiers.hpp"
#include "lrgda/lr_rgda.hpp"
#include "lrgda/stats.hpp"

#include <string>
#include <string_view>
#include <variant>

namespace lrgda {

/*
 * GDA1 container. Header (24 bytes, u32 LE each):
 *
 *   magic "GDA1" | version (1) | kind | C | d | r
 *
 * then C class ids (u32 LE, ascending), then float64 LE blocks by kind:
 *
 *   LDA     shared precision (d*d, row-major), W (C*d, row-major), b (C)
 *   SGD     W (C*d), b (C)
 *   RGDA    per class: mu (d), log_det, log_prior, precision (d*d)
 *   LRRGDA  alpha1, alpha2, alpha3, log_det_B, B_inv (d*d), then per class:
 *           w (d), b, P (r*d, row-major), M_inv (r*r), center (r)
 *   STATS   per class: count, shift (d), sum (d), sum_outer (d*d)
 *
 * r is 0 for every kind except LRRGDA.
 */
enum class ModelKind : std::uint32_t { Lda = 1, Rgda = 2, LrRgda = 3, Sgd = 4, Stats = 5 };

inline constexpr std::uint32_t kGdaVersion = 1;
inline constexpr std::size_t kGdaHeaderBytes = 24;

std::string kind_name(ModelKind kind);
/// Accepts lda, rgda, lrrgda, sgd, stats (case-insensitive).
ModelKind parse_kind(std::string_view name);

struct GdaHeader {
    ModelKind kind = ModelKind::Lda;
    std::uint32_t num_classes = 0;
    std::uint32_t dim = 0;
    std::uint32_t rank = 0;
};

GdaHeader peek_header(std::string_view bytes);

std::string encode_linear(const LinearClassifier& clf, ModelKind kind);
std::string encode_rgda(const RgdaClassifier& clf);
std::string encode_lr_rgda(const LrRgdaClassifier& clf);
std::string encode_stats(const StatsRegistry& registry);

StatsRegistry decode_stats(std::string_view bytes);

/// Any classifier kind loaded from a GDA1 file.
struct Model {
    ModelKind kind = ModelKind::Lda;
    std::variant<LinearClassifier, RgdaClassifier, LrRgdaClassifier> clf;

    const std::vector<ClassId>& class_ids() const;
    Index dim() const;
    Matrix scores(const RowMatrix& x, int threads = 1, FlopCounter* flops = nullptr) const;
};

Model decode_model(std::string_view bytes);
std::string encode_model(const Model& model);

struct StorageBlock {
    std::string name;
    std::uint64_t floats = 0;  // float64 count per occurrence
    bool per_class = false;
    std::uint64_t bytes = 0;   // total over all occurrences
};

/// Exact GDA1 byte counts, derived from the shapes only (nothing is allocated).
struct StorageReport {
    ModelKind kind = ModelKind::Lda;
    std::uint64_t num_classes = 0;
    std::uint64_t dim = 0;
    std::uint64_t rank = 0;
    std::uint64_t header_bytes = 0;  // fixed header plus class-id table
    std::vector<StorageBlock> blocks;

    std::uint64_t per_class_bytes() const;  // sum of per-class blocks over all classes
    std::uint64_t shared_bytes() const;
    std::uint64_t total_bytes() const;
    const StorageBlock& block(std::string_view name) const;
};

StorageReport storage_layout(ModelKind kind, std::uint64_t num_classes, std::uint64_t dim, std::uint64_t rank = 0);
StorageReport storage_report(const Model& model);

} // namespace lrgda
