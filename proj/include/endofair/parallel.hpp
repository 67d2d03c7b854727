#pragma once

#include <cstddef>
#include <functional>

namespace endofair {

// Number of worker threads: ENDOFAIR_THREADS if set (>= 1), else hardware count.
std::size_t thread_budget();

// Runs fn(i) for i in [begin, end) on a shared thread pool. Each index is
// computed independently, so results are bit-identical for any thread count.
// Calls from inside a pool worker run inline (serial) — no nested fan-out.
void parallel_for(std::size_t begin, std::size_t end, const std::function<void(std::size_t)>& fn,
                  std::size_t grain = 1);

} // namespace endofair
