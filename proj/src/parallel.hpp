#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace srmfi::detail {

inline int resolve_threads(int requested)
{
    if (requested > 0)
    {
        return requested;
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

// Calls body(i) for i in [0, n). Each index runs exactly once; callers write
// results into per-index slots so the outcome does not depend on scheduling.
template <class Body> void parallel_for(std::size_t n, int threads, Body &&body)
{
    const auto workers = std::min<std::size_t>(
            n, static_cast<std::size_t>(std::max(threads, 1)));
    if (workers <= 1)
    {
        for (std::size_t i = 0; i < n; ++i)
        {
            body(i);
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w)
        {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < n; i = next++)
                {
                    try
                    {
                        body(i);
                    }
                    catch (...)
                    {
                        std::lock_guard lock(failure_mutex);
                        if (!failure)
                        {
                            failure = std::current_exception();
                        }
                    }
                }
            });
        }
    }
    if (failure)
    {
        std::rethrow_exception(failure);
    }
}

} // namespace srmfi::detail
