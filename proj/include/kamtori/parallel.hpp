#pragma once

// Minimal deterministic work sharing.  Ranges are split into one statically sized
// chunk per worker, so chunk boundaries (and therefore any per-chunk reduction a
// caller performs) depend only on the range length and the configured thread count,
// never on scheduling.

#include <cstddef>
#include <thread>
#include <vector>

namespace kamtori {

// Process-wide worker count used by parallel_for.  Defaults to 1 (fully serial);
// the CLI sets it from --threads.
int thread_count();
void set_thread_count(int count);

// Calls f(begin, end) on disjoint chunks covering [0, n).  With thread_count()==1
// this is a plain loop on the calling thread.  f must be safe to run concurrently
// on disjoint chunks.
template <class F>
void parallel_for(std::size_t n, F&& f) {
    const int workers = thread_count();
    if (workers <= 1 || n < 2) {
        if (n > 0) f(std::size_t{0}, n);
        return;
    }
    const std::size_t t = static_cast<std::size_t>(workers);
    std::vector<std::thread> pool;
    pool.reserve(t);
    for (std::size_t w = 0; w < t; ++w) {
        const std::size_t begin = n * w / t;
        const std::size_t end = n * (w + 1) / t;
        if (begin == end) continue;
        pool.emplace_back([&f, begin, end] { f(begin, end); });
    }
    for (auto& th : pool) th.join();
}

}  // namespace kamtori
