#ifndef SSMVPR_PARALLEL_HPP
#define SSMVPR_PARALLEL_HPP

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace ssmvpr {

/// Resolves a requested thread count; 0 means all available cores.
inline std::size_t resolve_threads(std::size_t requested) {
    if (requested != 0) return requested;
    return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

/**
 * Runs `body(begin, end, worker)` over `[0, count)` split into contiguous,
 * statically assigned blocks, one per worker. Block boundaries depend only on
 * `count` and the worker count, so callers that reduce per-block results in
 * block order get identical output for a given thread count. The first
 * exception thrown by any worker is rethrown on the calling thread.
 */
template <typename Body>
void parallel_blocks(std::size_t count, std::size_t threads, Body&& body) {
    const std::size_t workers = std::min(resolve_threads(threads), std::max<std::size_t>(count, 1));
    if (workers <= 1) {
        body(std::size_t{0}, count, std::size_t{0});
        return;
    }
    std::exception_ptr error;
    std::mutex error_mutex;
    {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) {
            const std::size_t begin = count * w / workers;
            const std::size_t end = count * (w + 1) / workers;
            pool.emplace_back([&, begin, end, w] {
                try {
                    body(begin, end, w);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) error = std::current_exception();
                }
            });
        }
    }
    if (error) std::rethrow_exception(error);
}

/// Calls `fn(i)` for every index; each index is handled by exactly one worker.
template <typename Fn>
void parallel_for(std::size_t count, std::size_t threads, Fn&& fn) {
    parallel_blocks(count, threads, [&](std::size_t begin, std::size_t end, std::size_t) {
        for (std::size_t i = begin; i < end; ++i) fn(i);
    });
}

} // namespace ssmvpr

#endif
