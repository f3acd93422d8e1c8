#pragma once

#include <cstddef>
#include <functional>

namespace vda {

/// Worker cap for parallel loops. Defaults to the VDA_THREADS environment
/// variable when set, otherwise the hardware concurrency (at least 1).
std::size_t worker_count();
void set_worker_count(std::size_t n);  // 0 restores the default

/// Runs body(i) for i in [0, n) on up to worker_count() threads. Each index
/// runs exactly once; the first exception is rethrown after all workers join.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace vda
