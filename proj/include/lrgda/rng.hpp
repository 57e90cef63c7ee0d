#pragma once

#include "lrgda/types.hpp"

#include <cstdint>
#include <random>
#include <string_view>

namespace lrgda {

using Rng = std::mt19937_64;

/// 64-bit FNV-1a of a purpose string.
std::uint64_t hash_purpose(std::string_view purpose);

/// splitmix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

/**
 * Derive an independent seed for a named purpose.
 *
 * Every random draw in the library goes through a stream obtained here, so a
 * single base seed reproduces a whole run and components can be tested in
 * isolation without consuming each other's randomness.
 */
std::uint64_t derive_seed(std::uint64_t base, std::string_view purpose, std::uint64_t index = 0);

inline Rng make_rng(std::uint64_t base, std::string_view purpose, std::uint64_t index = 0)
{
    return Rng(derive_seed(base, purpose, index));
}

/// Fills a rows x cols matrix with i.i.d. standard normals, row by row.
RowMatrix standard_normal(Index rows, Index cols, Rng& rng);

/// Haar-distributed orthogonal matrix (QR of a Gaussian matrix with sign fix).
Matrix random_orthogonal(Index d, Rng& rng);

} // namespace lrgda
