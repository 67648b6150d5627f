#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace ebr {

inline std::size_t resolve_workers(int requested) {
    if (requested > 0) return static_cast<std::size_t>(requested);
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

/// Runs fn(i) for i in [0, n) on up to `workers` threads. Work items must
/// write to disjoint outputs; the first exception is rethrown after joining.
template <class Fn>
void parallel_for(std::size_t n, int workers, Fn&& fn) {
    const std::size_t w = std::min(resolve_workers(workers), n);
    if (w <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> threads;
    threads.reserve(w);
    for (std::size_t t = 0; t < w; ++t) {
        threads.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) error = std::current_exception();
                }
            }
        });
    }
    for (auto& th : threads) th.join();
    if (error) std::rethrow_exception(error);
}

} // namespace ebr
