#pragma once

#include <cstddef>
#include <functional>

namespace dinigrad {

/// Worker count used by parallel_for; 1 runs everything inline.
void set_thread_count(int count);
int thread_count();

/// Calls body(i) for i in [0, count) split into contiguous chunks. Each index
/// must write only its own output slot, so results do not depend on the
/// thread count.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

}  // namespace dinigrad
