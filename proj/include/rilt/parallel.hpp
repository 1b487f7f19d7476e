#pragma once

#include <atomic>
#include <cstdint>
#include <thread>
#include <vector>

namespace rilt {

inline int default_threads() {
    unsigned h = std::thread::hardware_concurrency();
    return h == 0 ? 1 : int(h);
}

// Runs f(i) for i in [0, n) over `threads` workers. Workers pull indices from a
// shared atomic, so results must be written to disjoint, index-addressed slots;
// reductions stay deterministic because callers combine slots in index order.
template <typename F>
void parallel_for(int64_t n, int threads, F&& f) {
    if (n <= 0) return;
    if (threads <= 1 || n == 1) {
        for (int64_t i = 0; i < n; ++i) f(i);
        return;
    }
    std::atomic<int64_t> next{0};
    auto worker = [&]() {
        while (true) {
            int64_t i = next.fetch_add(1, std::memory_order_relaxed);
            if (i >= n) return;
            f(i);
        }
    };
    std::vector<std::thread> pool;
    const int nt = int(std::min<int64_t>(threads, n));
    pool.reserve(nt - 1);
    for (int t = 0; t + 1 < nt; ++t) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
}

// As parallel_for but hands each worker a stable id in [0, threads), so
// callers can keep per-worker scratch state.
template <typename F>
void parallel_for_worker(int64_t n, int threads, F&& f) {
    if (n <= 0) return;
    if (threads <= 1 || n == 1) {
        for (int64_t i = 0; i < n; ++i) f(0, i);
        return;
    }
    std::atomic<int64_t> next{0};
    auto worker = [&](int wid) {
        while (true) {
            int64_t i = next.fetch_add(1, std::memory_order_relaxed);
            if (i >= n) return;
            f(wid, i);
        }
    };
    std::vector<std::thread> pool;
    const int nt = int(std::min<int64_t>(threads, n));
    pool.reserve(nt - 1);
    for (int t = 1; t < nt; ++t) pool.emplace_back(worker, t);
    worker(0);
    for (auto& th : pool) th.join();
}

}  // namespace rilt
