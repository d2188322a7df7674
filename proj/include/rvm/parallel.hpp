#pragma once

#include <cstddef>
#include <functional>

namespace rvm {

// RVM_THREADS if set and positive, else hardware concurrency.
int worker_count();

// Static contiguous chunks [begin, end) per worker; fn(worker, begin, end).
// The partition depends only on n and the worker count, so reductions merged
// in worker order are reproducible.
void parallel_chunks(std::size_t n, int workers, const std::function<void(int, std::size_t, std::size_t)>& fn);

// fn(i) for i in [0, n); independent items only.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn);

}  // namespace rvm
