#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace presgan {

// Worker cap for batched chain evaluation. PRESGAN_THREADS overrides the
// hardware count; read once per process.
inline unsigned max_threads() {
    static unsigned cached = [] {
        if (const char* env = std::getenv("PRESGAN_THREADS")) {
            char* end = nullptr;
            long v = std::strtol(env, &end, 10);
            if (end != env && v >= 1) return static_cast<unsigned>(std::min<long>(v, 1024));
        }
        unsigned hw = std::thread::hardware_concurrency();
        return hw ? hw : 1u;
    }();
    return cached;
}

// Runs fn(i) for i in [0, n). Each index owns its output slot and the
// partition is static, so results are identical for any worker count. If
// several workers throw, the exception from the smallest index wins.
template <typename F>
void parallel_for(std::size_t n, F&& fn) {
    std::size_t workers = std::min<std::size_t>(max_threads(), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<bool> stop{false};
    std::mutex error_mutex;
    std::size_t error_index = n;
    std::exception_ptr error;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            std::size_t lo = n * w / workers, hi = n * (w + 1) / workers;
            for (std::size_t i = lo; i < hi; ++i) {
                if (stop.load(std::memory_order_relaxed)) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (i < error_index) {
                        error_index = i;
                        error = std::current_exception();
                    }
                    stop.store(true, std::memory_order_relaxed);
                    return;
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace presgan
