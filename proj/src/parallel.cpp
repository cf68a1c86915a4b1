#include "punit/parallel.hpp"

#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace punit::par {

namespace {

int g_cap = 0;

int resolve_cap() {
    if (g_cap > 0) return g_cap;
    if (const char* env = std::getenv("PUNIT_THREADS")) {
        int n = std::atoi(env);
        if (n > 0) return n;
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

} // namespace

int thread_cap() { return resolve_cap(); }

void set_thread_cap(int n) { g_cap = n; }

void parallel_chunks(std::int64_t count, std::int64_t chunk_size,
                     const std::function<void(std::int64_t, std::int64_t, int)>& fn) {
    if (count <= 0) return;
    if (chunk_size <= 0) chunk_size = 1;
    const int nchunks = chunk_count(count, chunk_size);
    const int workers = std::min<int>(resolve_cap(), nchunks);

    if (workers <= 1) {
        for (int c = 0; c < nchunks; ++c) {
            std::int64_t b = static_cast<std::int64_t>(c) * chunk_size;
            std::int64_t e = std::min(count, b + chunk_size);
            fn(b, e, c);
        }
        return;
    }

    std::atomic<int> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto worker = [&]() {
        for (;;) {
            if (failed.load(std::memory_order_relaxed)) break;
            int c = next.fetch_add(1);
            if (c >= nchunks) break;
            std::int64_t b = static_cast<std::int64_t>(c) * chunk_size;
            std::int64_t e = std::min(count, b + chunk_size);
            try {
                fn(b, e, c);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                failed.store(true, std::memory_order_relaxed);
            }
        }
    };

    std::vector<std::thread> pool;
    pool.reserve(workers - 1);
    for (int i = 1; i < workers; ++i) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

} // namespace punit::par
