#ifndef RTFEST_PARALLEL_HPP
#define RTFEST_PARALLEL_HPP

#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace rtfest {

// Worker count for `jobs` independent tasks. RTFEST_WORKERS caps it.
inline std::size_t worker_count(std::size_t jobs) {
    std::size_t n = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("RTFEST_WORKERS")) {
        try {
            const long v = std::stol(env);
            if (v >= 1) n = std::min(n, static_cast<std::size_t>(v));
        } catch (const std::exception&) {
        }
    }
    return std::max<std::size_t>(1, std::min(n, jobs));
}

// Runs fn(i) for i in [0, n). The first exception thrown by any task is
// rethrown after all workers stop.
template <typename F>
void parallel_for(std::size_t n, F&& fn, std::size_t workers = 0) {
    if (n == 0) return;
    if (workers == 0) workers = worker_count(n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto run = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n || failed.load()) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
                failed = true;
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(run);
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace rtfest

#endif
