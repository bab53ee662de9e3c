#include "wclb/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace wclb {

namespace {

unsigned resolve_default() {
    if (const char* env = std::getenv("WCLB_THREADS")) {
        long v = std::strtol(env, nullptr, 10);
        if (v >= 1) return static_cast<unsigned>(v);
    }
    unsigned hc = std::thread::hardware_concurrency();
    return hc ? hc : 1u;
}

std::atomic<unsigned>& thread_slot() {
    static std::atomic<unsigned> n{0}; // 0 => not yet resolved
    return n;
}

} // namespace

void set_max_threads(unsigned n) { thread_slot().store(n ? n : 1u); }

unsigned max_threads() {
    unsigned n = thread_slot().load();
    if (n == 0) {
        n = resolve_default();
        thread_slot().store(n);
    }
    return n;
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
    if (n == 0) return;
    const std::size_t workers = std::min<std::size_t>(max_threads(), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    // Contiguous block partition: worker w handles [starts[w], starts[w+1]).
    // The first worker exception is rethrown after the join.
    std::vector<std::thread> pool;
    pool.reserve(workers);
    std::exception_ptr error;
    std::mutex error_mutex;
    const std::size_t base = n / workers, rem = n % workers;
    std::size_t begin = 0;
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t len = base + (w < rem ? 1 : 0);
        pool.emplace_back([&fn, &error, &error_mutex, begin, len] {
            try {
                for (std::size_t i = begin; i < begin + len; ++i) fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
            }
        });
        begin += len;
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

} // namespace wclb
