#include "lrgda/rng.hpp"

namespace lrgda {

std::uint64_t hash_purpose(std::string_view purpose)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : purpose) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t mix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t base, std::string_view purpose, std::uint64_t index)
{
    return mix64(mix64(base ^ hash_purpose(purpose)) + mix64(index));
}

RowMatrix standard_normal(Index rows, Index cols, Rng& rng)
{
    std::normal_distribution<double> normal(0.0, 1.0);
    RowMatrix out(rows, cols);
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j)
            out(i, j) = normal(rng);
    return out;
}

Matrix random_orthogonal(Index d, Rng& rng)
{
    Matrix g = standard_normal(d, d, rng);
    Eigen::HouseholderQR<Matrix> qr(g);
    Matrix q = qr.householderQ();
    Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (Index j = 0; j < d; ++j)
        if (r(j, j) < 0)
            q.col(j) = -q.col(j);
    return q;
}

} // namespace lrgda
