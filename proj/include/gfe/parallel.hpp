#pragma once

#include <cstddef>
#include <cstdint>
#include <exception>
#include <stdexcept>
#include <thread>
#include <vector>

namespace gfe {

// Static block partition of [0, n) across `workers` threads.  Each worker
// gets one contiguous block, so any per-item output indexed by item id is
// identical regardless of the worker count; per-worker accumulators must
// be merged in worker order by the caller.
template <class Body>
void run_partitioned(std::uint64_t n, unsigned workers, Body&& body) {
    if (workers == 0) throw std::invalid_argument("run_partitioned: zero workers");
    if (n == 0) return;
    if (workers > n) workers = static_cast<unsigned>(n);
    if (workers == 1) {
        body(0u, std::uint64_t{0}, n);
        return;
    }
    const std::uint64_t base = n / workers, rem = n % workers;
    std::vector<std::thread> threads;
    std::vector<std::exception_ptr> errors(workers);
    threads.reserve(workers);
    std::uint64_t begin = 0;
    for (unsigned w = 0; w < workers; ++w) {
        const std::uint64_t len = base + (w < rem ? 1 : 0);
        const std::uint64_t end = begin + len;
        threads.emplace_back([&body, &errors, w, begin, end] {
            try {
                body(w, begin, end);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
        begin = end;
    }
    for (auto& t : threads) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

// Per-trial map into a preallocated vector.  Output depends only on the
// trial index, never on the partition.
template <class T, class Fn>
std::vector<T> map_trials(std::uint64_t trials, unsigned workers, Fn&& fn) {
    std::vector<T> out(trials);
    run_partitioned(trials, workers, [&](unsigned, std::uint64_t begin, std::uint64_t end) {
        for (std::uint64_t t = begin; t < end; ++t) out[t] = fn(t);
    });
    return out;
}

} // namespace gfe
