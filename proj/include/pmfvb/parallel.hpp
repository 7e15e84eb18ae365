#pragma once

// Fixed-partition parallel loops. Work is cut into blocks whose boundaries
// depend only on the problem size, never on the worker count, and partial
// results are merged in block order. Results are therefore bit-identical for
// any number of threads.

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace pmfvb {

inline constexpr std::size_t kBlockSize = 4096;

inline std::size_t num_blocks(std::size_t n, std::size_t block = kBlockSize) {
    return (n + block - 1) / block;
}

/// Default worker count: PMFVB_THREADS if set, else 1.
inline unsigned default_threads() {
    if (const char* env = std::getenv("PMFVB_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v > 0) return static_cast<unsigned>(v);
    }
    return 1;
}

/// Calls fn(block_index, begin, end) for every block of [0, n).
template <class Fn>
void for_each_block(std::size_t n, unsigned threads, Fn&& fn, std::size_t block = kBlockSize) {
    const std::size_t blocks = num_blocks(n, block);
    const auto run = [&](std::size_t b) { fn(b, b * block, std::min(n, (b + 1) * block)); };
    if (threads <= 1 || blocks <= 1) {
        for (std::size_t b = 0; b < blocks; ++b) run(b);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    const auto worker = [&] {
        for (;;) {
            const std::size_t b = next.fetch_add(1);
            if (b >= blocks) return;
            try {
                run(b);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
            }
        }
    };
    std::vector<std::jthread> pool;
    const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(threads, blocks));
    pool.reserve(workers - 1);
    for (unsigned w = 1; w < workers; ++w) pool.emplace_back(worker);
    worker();
    pool.clear();
    if (error) std::rethrow_exception(error);
}

}  // namespace pmfvb
