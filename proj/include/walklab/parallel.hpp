#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <thread>
#include <utility>
#include <vector>

namespace walklab {

inline unsigned resolve_workers(unsigned requested) {
    if (requested > 0) return requested;
    unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? hw : 1;
}

// Replicates are split into fixed-size blocks claimed by worker threads.
// Per-block accumulators are merged in block order afterwards, so results are
// bitwise identical for any worker count. Acc needs merge(const Acc&).
inline constexpr std::uint64_t replicate_block = 4096;

template <class Acc, class Work>
Acc parallel_accumulate(std::uint64_t total, unsigned workers, const Acc& init, Work&& work) {
    const std::uint64_t nblocks = total == 0 ? 0 : (total - 1) / replicate_block + 1;
    std::vector<Acc> partial(static_cast<std::size_t>(nblocks), init);
    workers = resolve_workers(workers);
    if (nblocks < workers) workers = nblocks ? static_cast<unsigned>(nblocks) : 1;

    std::atomic<std::uint64_t> next{0};
    std::atomic<std::uint64_t> first_failed_block{std::uint64_t(-1)};
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(nblocks));

    auto body = [&]() {
        for (;;) {
            std::uint64_t b = next.fetch_add(1);
            if (b >= nblocks) return;
            std::uint64_t lo = b * replicate_block;
            std::uint64_t hi = std::min(total, lo + replicate_block);
            try {
                for (std::uint64_t r = lo; r < hi; ++r) work(partial[static_cast<std::size_t>(b)], r);
            } catch (...) {
                errors[static_cast<std::size_t>(b)] = std::current_exception();
                std::uint64_t cur = first_failed_block.load();
                while (b < cur && !first_failed_block.compare_exchange_weak(cur, b)) {}
            }
        }
    };

    if (workers <= 1) {
        body();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (unsigned w = 0; w < workers; ++w) pool.emplace_back(body);
        for (auto& t : pool) t.join();
    }

    // Deterministic error choice: the lowest failed block wins.
    std::uint64_t bad = first_failed_block.load();
    if (bad != std::uint64_t(-1)) std::rethrow_exception(errors[static_cast<std::size_t>(bad)]);

    Acc out = init;
    for (auto& p : partial) out.merge(p);
    return out;
}

}  // namespace walklab
