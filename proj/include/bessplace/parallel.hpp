#pragma once

#include <atomic>
#include <exception>
#include <thread>
#include <vector>

namespace bessplace {

// Index-parallel loop. Results must be written to per-index slots by the
// caller; errors are rethrown for the lowest failing index so concurrent and
// serial execution surface the same diagnostic.
template <typename Fn>
void parallel_for(int n, int workers, Fn&& fn) {
    if (n <= 0) return;
    if (workers <= 1 || n == 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::exception_ptr> errors(n);
    auto body = [&] {
        for (;;) {
            const int i = next.fetch_add(1);
            if (i >= n) return;
            try {
                fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    const int n_threads = std::min(workers, n);
    pool.reserve(n_threads);
    for (int w = 0; w < n_threads; ++w) pool.emplace_back(body);
    for (auto& th : pool) th.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

inline int default_workers() {
    const unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : static_cast<int>(hc);
}

}  // namespace bessplace
