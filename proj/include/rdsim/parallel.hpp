#pragma once

// Deterministic index-space parallelism. Work item i always computes the same
// value regardless of worker count; each worker writes only to slots it owns
// (strided by index), so results are bitwise independent of scheduling.

#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace rdsim {

template <typename Fn>
void parallel_for_index(std::size_t n_items, unsigned workers, const Fn& fn) {
    if (workers <= 1 || n_items <= 1) {
        for (std::size_t i = 0; i < n_items; ++i) fn(i);
        return;
    }
    const unsigned w = static_cast<unsigned>(std::min<std::size_t>(workers, n_items));
    std::vector<std::thread> threads;
    std::vector<std::exception_ptr> errors(w);
    threads.reserve(w);
    for (unsigned t = 0; t < w; ++t) {
        threads.emplace_back([&, t]() {
            try {
                for (std::size_t i = t; i < n_items; i += w) fn(i);
            } catch (...) {
                errors[t] = std::current_exception();
            }
        });
    }
    for (std::thread& th : threads) th.join();
    for (const std::exception_ptr& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace rdsim
