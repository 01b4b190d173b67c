#pragma once

#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

namespace vcx {

/// Run fn(i) for i in [0, n) across up to `threads` workers with a static
/// partition. Results must be written to per-index slots so the outcome is
/// independent of scheduling. threads == 0 means hardware concurrency.
inline void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn) {
    if (n == 0) return;
    if (threads == 0) threads = std::thread::hardware_concurrency();
    if (threads <= 1 || n == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    threads = std::min(threads, n);
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) {
        pool.emplace_back([&, t]() {
            for (std::size_t i = t; i < n; i += threads) fn(i);
        });
    }
    for (auto& th : pool) th.join();
}

} // namespace vcx
