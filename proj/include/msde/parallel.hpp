#ifndef MSDE_PARALLEL_HPP
#define MSDE_PARALLEL_HPP

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

#include "msde/common.hpp"

namespace msde {

namespace detail {
inline std::atomic<int>& thread_setting() {
    static std::atomic<int> n{1};
    return n;
}
}  // namespace detail

/// Worker count used by row-parallel kernels, in the spirit of Eigen::setNbThreads.
/// Results never depend on this value: each row writes only its own output slot and
/// all cross-row reductions run serially in row order.
inline void set_num_threads(int n) { detail::thread_setting() = std::max(1, n); }
inline int num_threads() { return detail::thread_setting(); }

/// Calls fn(i) for i in [0, n), split into contiguous chunks across num_threads() workers.
/// The first exception thrown by any worker is rethrown on the calling thread.
template <typename Fn>
void parallel_for(Index n, Fn&& fn) {
    const auto workers = static_cast<Index>(std::min<Index>(num_threads(), std::max<Index>(n, 1)));
    if (workers <= 1) {
        for (Index i = 0; i < n; ++i) fn(i);
        return;
    }
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::jthread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    const Index chunk = (n + workers - 1) / workers;
    for (Index w = 0; w < workers; ++w) {
        const Index begin = w * chunk;
        const Index end = std::min(n, begin + chunk);
        if (begin >= end) break;
        pool.emplace_back([&, begin, end] {
            try {
                for (Index i = begin; i < end; ++i) fn(i);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        });
    }
    pool.clear();
    if (failure) std::rethrow_exception(failure);
}

}  // namespace msde

#endif  // MSDE_PARALLEL_HPP
