#include "fbz/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <thread>

namespace fbz {

namespace {
std::atomic<int> g_workers{0};

int hardware_workers() {
    unsigned n = std::thread::hardware_concurrency();
    return n == 0 ? 1 : static_cast<int>(n);
}
}  // namespace

int worker_count() {
    int n = g_workers.load(std::memory_order_relaxed);
    return n > 0 ? n : hardware_workers();
}

void set_worker_count(int n) { g_workers.store(n, std::memory_order_relaxed); }

void for_lanes(std::size_t n, const std::function<void(int, std::size_t, std::size_t)>& body) {
    if (n == 0) return;
    const std::size_t chunk = (n + kLanes - 1) / kLanes;
    auto run_lane = [&](int lane) {
        std::size_t b = std::min(n, static_cast<std::size_t>(lane) * chunk);
        std::size_t e = std::min(n, b + chunk);
        if (b < e) body(lane, b, e);
    };
    int nthreads = std::min(worker_count(), kLanes);
    if (nthreads <= 1) {
        for (int lane = 0; lane < kLanes; ++lane) run_lane(lane);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(nthreads);
    for (int t = 0; t < nthreads; ++t) {
        pool.emplace_back([&] {
            for (;;) {
                int lane = next.fetch_add(1, std::memory_order_relaxed);
                if (lane >= kLanes) return;
                run_lane(lane);
            }
        });
    }
    for (auto& th : pool) th.join();
}

double lane_sum(std::size_t n, const std::function<double(int, std::size_t, std::size_t)>& body) {
    double partial[kLanes] = {};
    for_lanes(n, [&](int lane, std::size_t b, std::size_t e) { partial[lane] = body(lane, b, e); });
    double s = 0.0;
    for (int lane = 0; lane < kLanes; ++lane) s += partial[lane];
    return s;
}

void lane_accumulate(std::size_t n, std::size_t m, std::vector<double>& out,
                     const std::function<void(int, std::size_t, std::size_t, double*)>& body) {
    std::vector<std::vector<double>> partial(kLanes);
    for_lanes(n, [&](int lane, std::size_t b, std::size_t e) {
        partial[lane].assign(m, 0.0);
        body(lane, b, e, partial[lane].data());
    });
    out.assign(m, 0.0);
    for (int lane = 0; lane < kLanes; ++lane) {
        if (partial[lane].empty()) continue;
        for (std::size_t i = 0; i < m; ++i) out[i] += partial[lane][i];
    }
}

}  // namespace fbz
