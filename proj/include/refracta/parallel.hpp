#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <vector>

namespace refracta {

/// Worker count used by every parallel loop. Defaults to REFRACTA_THREADS or
/// the hardware concurrency.
int thread_count();
void set_thread_count(int n);

/// Runs body(begin, end) over contiguous blocks of [0, n). Blocks are disjoint;
/// callers must only write to per-index outputs so results never depend on
/// scheduling.
void parallel_blocks(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body,
                     std::size_t min_block = 256);

template <class F>
void parallel_for(std::size_t n, F&& f, std::size_t min_block = 256) {
    parallel_blocks(
        n,
        [&](std::size_t b, std::size_t e) {
            for (std::size_t i = b; i < e; ++i) f(i);
        },
        min_block);
}

/// Deterministic sum: values are summed in fixed chunks of `chunk` consecutive
/// indices, then the chunk partials are combined by a pairwise tree. The result
/// is independent of the thread count.
template <class T, class F>
T deterministic_sum(std::size_t n, F&& term, T zero, std::size_t chunk = 1024) {
    const std::size_t nchunks = (n + chunk - 1) / chunk;
    std::vector<T> partial(nchunks, zero);
    parallel_for(
        nchunks,
        [&](std::size_t c) {
            T acc = zero;
            const std::size_t e = std::min(n, (c + 1) * chunk);
            for (std::size_t i = c * chunk; i < e; ++i) acc += term(i);
            partial[c] = acc;
        },
        1);
    if (partial.empty()) return zero;
    for (std::size_t stride = 1; stride < partial.size(); stride *= 2)
        for (std::size_t i = 0; i + stride < partial.size(); i += 2 * stride) partial[i] += partial[i + stride];
    return partial[0];
}

}  // namespace refracta
