#include "hypocoerce/parallel.hpp"

#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace hypo {

int worker_count() {
    if (const char* env = std::getenv("HYPOCOERCE_WORKERS")) {
        int w = std::atoi(env);
        if (w >= 1) return w;
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

void parallel_chunks(size_t n, size_t chunk_size,
                     const std::function<void(size_t, size_t, size_t)>& fn) {
    if (n == 0) return;
    if (chunk_size == 0) chunk_size = 1;
    size_t n_chunks = (n + chunk_size - 1) / chunk_size;
    int workers = worker_count();
    if (workers == 1 || n_chunks == 1) {
        for (size_t c = 0; c < n_chunks; ++c)
            fn(c, c * chunk_size, std::min(n, (c + 1) * chunk_size));
        return;
    }

    std::atomic<size_t> next{0};
    std::exception_ptr error;
    std::atomic<bool> failed{false};

    auto work = [&]() {
        for (;;) {
            size_t c = next.fetch_add(1);
            if (c >= n_chunks || failed.load()) return;
            try {
                fn(c, c * chunk_size, std::min(n, (c + 1) * chunk_size));
            } catch (...) {
                if (!failed.exchange(true)) error = std::current_exception();
                return;
            }
        }
    };

    std::vector<std::thread> pool;
    int spawn = std::min<size_t>(workers, n_chunks);
    pool.reserve(spawn);
    for (int i = 0; i < spawn; ++i) pool.emplace_back(work);
    for (auto& t : pool) t.join();
    if (failed.load() && error) std::rethrow_exception(error);
}

} // namespace hypo
