#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <thread>
#include <vector>

namespace lrgda {

/// Multiply-add counter filled by the scoring kernels when instrumentation is requested.
struct FlopCounter {
    std::uint64_t multiply_adds = 0;
    void add(std::uint64_t n) { multiply_adds += n; }
};

/**
 * Run fn(i) for i in [0, n) on up to `threads` workers with static chunking.
 *
 * Each index is processed exactly once and results must be written to
 * per-index slots, so the outcome does not depend on the thread count. The
 * exception from the lowest failing index is rethrown.
 */
template <class Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn)
{
    if (threads <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i)
            fn(i);
        return;
    }
    const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(threads), n);
    std::vector<std::exception_ptr> errors(n);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            for (std::size_t i = w; i < n; i += workers) {
                try {
                    fn(i);
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool)
        t.join();
    for (auto& e : errors)
        if (e)
            std::rethrow_exception(e);
}

} // namespace lrgda
