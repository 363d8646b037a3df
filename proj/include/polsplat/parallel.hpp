#pragma once

#include <algorithm>
#include <functional>
#include <thread>
#include <vector>

namespace polsplat {

/// Runs fn(worker, begin, end) over [0, n) split into contiguous chunks,
/// one chunk per worker. threads <= 1 runs everything inline on worker 0,
/// which is the strict sequential mode used by deterministic tests.
inline void parallel_chunks(size_t n, int threads,
                            const std::function<void(int, size_t, size_t)>& fn) {
    if (n == 0) return;
    const int workers = std::max(1, threads);
    if (workers == 1 || n == 1) {
        fn(0, 0, n);
        return;
    }
    const int used = static_cast<int>(std::min<size_t>(workers, n));
    const size_t chunk = (n + used - 1) / used;
    std::vector<std::thread> pool;
    pool.reserve(used);
    for (int w = 0; w < used; ++w) {
        const size_t begin = w * chunk;
        const size_t end = std::min(n, begin + chunk);
        if (begin >= end) break;
        pool.emplace_back(fn, w, begin, end);
    }
    for (auto& t : pool) t.join();
}

} // namespace polsplat
