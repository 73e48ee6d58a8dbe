#ifndef FBZ_PARALLEL_HPP
#define FBZ_PARALLEL_HPP

#include <cstddef>
#include <functional>
#include <vector>

namespace fbz {

// Deterministic work partitioning. Ranges are split into a fixed number of
// lanes that does not depend on the worker count; each lane owns its partial
// accumulator and processes its chunks in index order, and the lane partials
// are reduced in lane order. Results are therefore bitwise identical for any
// number of workers.
constexpr int kLanes = 16;

int worker_count();
void set_worker_count(int n);  // n <= 0 restores the hardware default

// Runs body(lane, begin, end) over [0,n) split into kLanes contiguous lanes.
// Lanes execute concurrently on up to worker_count() threads; a lane never
// runs on two threads at once.
void for_lanes(std::size_t n, const std::function<void(int, std::size_t, std::size_t)>& body);

// Sum of per-lane partials produced by body(lane, begin, end) -> double,
// reduced in lane order.
double lane_sum(std::size_t n, const std::function<double(int, std::size_t, std::size_t)>& body);

// Elementwise sum of per-lane partial vectors (scatter targets). Each lane
// accumulates into its own buffer of size m; buffers are added in lane order.
void lane_accumulate(std::size_t n, std::size_t m, std::vector<double>& out,
                     const std::function<void(int, std::size_t, std::size_t, double*)>& body);

}  // namespace fbz

#endif
