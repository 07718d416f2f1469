#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <thread>
#include <vector>

namespace xct {

inline int effective_threads(int requested) {
    if (requested > 0) return requested;
    unsigned hc = std::thread::hardware_concurrency();
    return hc > 0 ? static_cast<int>(hc) : 1;
}

// Static contiguous partition of [begin, end) into at most `threads` chunks.
// Chunk boundaries depend only on the range and the thread count, so any
// per-chunk work that owns its output slice is reproducible by construction.
inline void parallel_for_chunks(std::int64_t begin, std::int64_t end, int threads,
                                const std::function<void(std::int64_t, std::int64_t)>& body) {
    const std::int64_t n = end - begin;
    if (n <= 0) return;
    threads = static_cast<int>(
        std::max<std::int64_t>(1, std::min<std::int64_t>(effective_threads(threads), n)));
    if (threads == 1) {
        body(begin, end);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    const std::int64_t chunk = (n + threads - 1) / threads;
    for (int i = 0; i < threads; ++i) {
        const std::int64_t lo = begin + i * chunk;
        const std::int64_t hi = std::min(end, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([&body, lo, hi] { body(lo, hi); });
    }
    for (auto& t : pool) t.join();
}

} // namespace xct
