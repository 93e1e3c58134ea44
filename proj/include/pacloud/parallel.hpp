#pragma once

#include <cstddef>
#include <functional>

namespace pacloud {

/// Worker count used by every parallel kernel. Defaults to PACLOUD_THREADS
/// when set, otherwise std::thread::hardware_concurrency().
std::size_t thread_count();
void set_thread_count(std::size_t n);

/// Runs body(i) for i in [0, n). Each index is handled by exactly one worker;
/// kernels only write to state owned by their index, so results do not depend
/// on the worker count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)> &body);

} // namespace pacloud
