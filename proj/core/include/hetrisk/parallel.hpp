/**
 * @file parallel.hpp
 * @brief Minimal deterministic parallel-for over an index range.
 */

#pragma once

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace hetrisk {

/// Threads to use: explicit request, HETRISK_THREADS, or hardware default.
inline int resolve_threads(int requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("HETRISK_THREADS")) {
        const int v = std::atoi(env);
        if (v > 0) return v;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

/**
 * Runs fn(i) for i in [0, count) across `threads` workers with a static
 * block partition. Each index is processed exactly once, so writes to
 * per-index output slots are race free and results do not depend on the
 * thread count. The first exception thrown by any worker is rethrown.
 */
template <class Fn>
void parallel_for(long count, int threads, Fn&& fn) {
    if (count <= 0) return;
    const int workers = std::max(1, std::min<long>(threads, count) > 0
                                        ? static_cast<int>(std::min<long>(threads, count))
                                        : 1);
    if (workers == 1) {
        for (long i = 0; i < count; ++i) fn(i);
        return;
    }
    std::mutex err_mutex;
    std::exception_ptr first_error;
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        const long begin = count * w / workers;
        const long end = count * (w + 1) / workers;
        pool.emplace_back([&, begin, end] {
            try {
                for (long i = begin; i < end; ++i) fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace hetrisk
