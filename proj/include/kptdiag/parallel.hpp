#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace kptdiag {

/// Run fn(i) for i in [0, n) on up to n_threads workers (static block partition).
/// Results are deterministic as long as fn(i) writes only to slot i of some
/// preallocated output; any ordering effects are confined to scheduling.
/// The first exception thrown by a worker is rethrown after all threads join.
template <typename F>
void parallel_for(std::size_t n, int n_threads, F&& fn) {
    if (n == 0) return;
    if (n_threads < 1) n_threads = 1;
    const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(n_threads), n);
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }

    std::exception_ptr first_error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    const std::size_t chunk = (n + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t begin = w * chunk;
        const std::size_t end = std::min(n, begin + chunk);
        if (begin >= end) break;
        pool.emplace_back([&, begin, end] {
            try {
                for (std::size_t i = begin; i < end; ++i) fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        });
    }
    for (std::thread& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace kptdiag
