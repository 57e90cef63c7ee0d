#pragma once

#include "lrgda/types.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>

namespace lrgda {

/*
 * FMX1 binary feature matrix, all integers little-endian:
 *
 *   offset  size  field
 *   0       4     magic "FMX1"
 *   4       4     flags u32 (bit 0: labels present)
 *   8       8     rows u64
 *   16      4     cols u32
 *   20      4     reserved u32 (written 0, ignored on read)
 *   24      8*rows*cols   float64 LE, row-major
 *   ...     4*rows        u32 LE labels, only if flag bit 0 is set
 *
 * CSV alternative: header `label,f0,f1,...` (label column optional), one row
 * per sample.
 */
inline constexpr std::size_t kFmxHeaderBytes = 24;
inline constexpr std::uint32_t kFmxFlagLabels = 1u;

std::string encode_fmx(const FeatureMatrix& m);
FeatureMatrix decode_fmx(std::string_view bytes);

std::string encode_csv(const FeatureMatrix& m);
FeatureMatrix decode_csv(std::string_view text);

/// Reads FMX1 if the file starts with the magic, CSV otherwise.
FeatureMatrix read_features(const std::string& path);
void write_fmx(const std::string& path, const FeatureMatrix& m);
void write_csv(const std::string& path, const FeatureMatrix& m);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view bytes);

// Little-endian primitives shared with the classifier container.
void put_u32(std::string& out, std::uint32_t v);
void put_u64(std::string& out, std::uint64_t v);
void put_f64(std::string& out, double v);
std::uint32_t get_u32(std::string_view bytes, std::size_t offset);
std::uint64_t get_u64(std::string_view bytes, std::size_t offset);
double get_f64(std::string_view bytes, std::size_t offset);

} // namespace lrgda
