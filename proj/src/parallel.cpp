#include "kamtori/parallel.hpp"

#include <atomic>
#include <stdexcept>

namespace kamtori {

namespace {
std::atomic<int> g_threads{1};
}

int thread_count() { return g_threads.load(std::memory_order_relaxed); }

void set_thread_count(int count) {
    if (count < 1) throw std::invalid_argument("thread count must be >= 1");
    g_threads.store(count, std::memory_order_relaxed);
}

}  // namespace kamtori
