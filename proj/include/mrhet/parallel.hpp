#pragma once

#include <cstddef>
#include <exception>
#include <functional>
#include <vector>

namespace mrhet {

/// Worker count: the MRHET_WORKERS environment variable when set to a
/// positive integer, otherwise std::thread::hardware_concurrency() (min 1).
std::size_t default_workers();

/// Runs task(i) for i in [0, n) on up to `workers` threads. Tasks must write
/// only to their own output slot. Returns one entry per task: null on
/// success, the thrown exception otherwise.
std::vector<std::exception_ptr> run_tasks(std::size_t n, std::size_t workers,
                                          const std::function<void(std::size_t)>& task);

}  // namespace mrhet
