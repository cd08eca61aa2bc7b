#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <optional>
#include <thread>
#include <vector>

namespace decaylab {

template <typename Fn>
auto parallel_map(int n, int threads, Fn&& fn) -> std::vector<decltype(fn(0))>
{
    using R = decltype(fn(0));
    std::vector<std::optional<R>> slots(std::max(n, 0));
    std::atomic<int> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (int i = next++; i < n; i = next++) {
            try {
                slots[i].emplace(fn(i));
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
            }
        }
    };
    const int k = std::clamp(threads, 1, std::max(n, 1));
    if (k == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int i = 0; i < k; ++i) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (error) std::rethrow_exception(error);
    std::vector<R> out;
    out.reserve(slots.size());
    for (auto& s : slots) out.push_back(std::move(*s));
    return out;
}

} // namespace decaylab
