#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace l1bsde {

/// Runs body(i) for i in [0, n) on up to `threads` threads (contiguous
/// chunks). The first exception thrown by any chunk is rethrown.
template <class Body>
void parallel_for(std::size_t n, std::size_t threads, Body&& body) {
    if (threads <= 1 || n < 64) {
        for (std::size_t i = 0; i < n; ++i) {
            body(i);
        }
        return;
    }
    threads = std::min(threads, n);
    std::exception_ptr first;
    std::mutex m;
    std::vector<std::thread> pool;
    const std::size_t chunk = (n + threads - 1) / threads;
    for (std::size_t t = 0; t < threads; ++t) {
        const std::size_t lo = t * chunk;
        const std::size_t hi = std::min(n, lo + chunk);
        if (lo >= hi) {
            break;
        }
        pool.emplace_back([&, lo, hi] {
            try {
                for (std::size_t i = lo; i < hi; ++i) {
                    body(i);
                }
            } catch (...) {
                std::lock_guard<std::mutex> lock(m);
                if (!first) {
                    first = std::current_exception();
                }
            }
        });
    }
    for (auto& th : pool) {
        th.join();
    }
    if (first) {
        std::rethrow_exception(first);
    }
}

} // namespace l1bsde
