// parallel.hpp — worker pool for independent loop bodies.
//
// Outputs must be written to per-index slots; results are then identical for
// any worker count.
#pragma once

#include <cstdint>
#include <functional>

namespace ctrl::parallel {

// 0 restores the default (hardware concurrency).
void set_workers(int32_t n);
int32_t workers();

// Runs body(i) for i in [0, count). Rethrows the first exception by index.
void parallel_for(int64_t count, const std::function<void(int64_t)>& body);

}  // namespace ctrl::parallel
