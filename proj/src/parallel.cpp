#include "ppcreg/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <thread>
#include <vector>

namespace ppcreg {

namespace {

int env_thread_cap() {
    if (const char* env = std::getenv("PPCREG_THREADS")) {
        const int n = std::atoi(env);
        if (n > 0) return n;
    }
    return 0;
}

std::atomic<int> g_max_threads{env_thread_cap()};

} // namespace

void set_max_threads(int n) { g_max_threads.store(n > 0 ? n : 0); }

int max_threads() {
    const int cap = g_max_threads.load();
    const int hw = std::max(1u, std::thread::hardware_concurrency());
    return cap > 0 ? std::min(cap, hw) : hw;
}

void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn) {
    if (n == 0) return;
    const std::size_t workers =
        std::min<std::size_t>(static_cast<std::size_t>(max_threads()), n);
    if (workers <= 1) {
        fn(0, n);
        return;
    }

    const std::size_t block = (n + workers - 1) / workers;
    std::vector<std::thread> threads;
    threads.reserve(workers - 1);
    std::exception_ptr error;
    std::atomic<bool> failed{false};

    auto run = [&](std::size_t begin, std::size_t end) {
        try {
            fn(begin, end);
        } catch (...) {
            if (!failed.exchange(true)) error = std::current_exception();
        }
    };

    for (std::size_t w = 1; w < workers; ++w) {
        const std::size_t begin = w * block;
        const std::size_t end = std::min(n, begin + block);
        if (begin >= end) break;
        threads.emplace_back(run, begin, end);
    }
    run(0, std::min(n, block));
    for (auto& t : threads) t.join();

    if (failed.load()) std::rethrow_exception(error);
}

} // namespace ppcreg
