#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace phenex {

inline unsigned resolve_threads(unsigned requested) {
    if (requested != 0) return requested;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

/// Runs body(begin, end, worker) over contiguous chunks of [0, n). Chunk
/// boundaries depend only on n and the thread count; callers that write results
/// by index get output independent of scheduling.
template <typename Body>
void parallel_for(std::size_t n, unsigned threads, Body&& body) {
    threads = std::max(1u, resolve_threads(threads));
    if (threads == 1 || n < 2) {
        body(std::size_t{0}, n, 0u);
        return;
    }
    const std::size_t workers = std::min<std::size_t>(threads, n);
    const std::size_t chunk = (n + workers - 1) / workers;
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t begin = w * chunk;
        const std::size_t end = std::min(n, begin + chunk);
        if (begin >= end) break;
        pool.emplace_back([&, begin, end, w] {
            try {
                body(begin, end, static_cast<unsigned>(w));
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

} // namespace phenex
