#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace covlift {

/// Process-wide worker count used by the data-parallel loops below. 1 means serial.
int num_threads();
void set_num_threads(int n);

/// Runs body(i) for i in [0, n) split into contiguous chunks. Each index is visited exactly
/// once, so writing results into a pre-sized vector keeps reductions order-independent.
template <class Body>
void parallel_for(std::size_t n, Body&& body) {
    const auto workers = static_cast<std::size_t>(std::max(1, num_threads()));
    if (workers == 1 || n < 2 * workers) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::vector<std::thread> pool;
    const std::size_t chunk = (n + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t lo = w * chunk;
        const std::size_t hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, &body] {
            for (std::size_t i = lo; i < hi; ++i) body(i);
        });
    }
    for (auto& t : pool) t.join();
}

} // namespace covlift
