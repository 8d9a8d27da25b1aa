#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace bayesbag {

/// Number of worker threads to use when the caller passes 0.
inline unsigned default_thread_count() {
    return std::max(1u, std::thread::hardware_concurrency());
}

/** Runs fn(i) for i in [0, count) on up to `threads` workers.
 *
 * Work items must write only to their own slot of any shared output.  If several items throw, the
 * exception from the lowest index is rethrown, so failures are reported identically for every
 * thread count.
 */
template <class Fn>
void parallel_for(std::size_t count, unsigned threads, Fn&& fn) {
    if (threads == 0) threads = default_thread_count();
    const auto workers = static_cast<std::size_t>(std::min<std::size_t>(threads, count));
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }

    std::atomic<std::size_t> next{0};
    std::mutex error_mutex;
    std::exception_ptr first_error;
    std::size_t first_error_index = count;

    auto work = [&] {
        for (std::size_t i = next++; i < count; i = next++) {
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock{error_mutex};
                if (i < first_error_index) {
                    first_error_index = i;
                    first_error = std::current_exception();
                }
            }
        }
    };

    {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    }
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace bayesbag
