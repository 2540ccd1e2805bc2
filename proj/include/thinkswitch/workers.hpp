#pragma once

#include <cstddef>
#include <functional>

namespace thinkswitch {

inline constexpr std::size_t kDefaultConcurrency = 8;

/// Calls fn(i) for every i in [0, n) on at most `concurrency` threads.
/// The first exception thrown by any call is rethrown after all workers stop.
void parallel_for(std::size_t n, std::size_t concurrency, const std::function<void(std::size_t)>& fn);

}  // namespace thinkswitch
