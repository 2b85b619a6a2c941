#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace flip {

// Runs fn(i) for i in [0, n). max_threads == 0 picks hardware concurrency.
// Work is partitioned statically, so results are index-deterministic.
inline void run_parallel(std::size_t n, int max_threads, const std::function<void(std::size_t)>& fn) {
    if (n == 0) return;
    std::size_t workers = max_threads > 0 ? static_cast<std::size_t>(max_threads)
                                          : std::max(1u, std::thread::hardware_concurrency());
    workers = std::min(workers, n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    std::exception_ptr first_error;
    std::mutex err_mu;
    for (std::size_t wi = 0; wi < workers; ++wi) {
        pool.emplace_back([&, wi] {
            try {
                for (std::size_t i = wi; i < n; i += workers) fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mu);
                if (!first_error) first_error = std::current_exception();
            }
        });
    }
    for (std::thread& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace flip
