#ifndef TILTWISE_PARALLEL_HPP
#define TILTWISE_PARALLEL_HPP

#include <cstddef>
#include <functional>

namespace tiltwise {

// Thread count resolution: explicit argument > TILTWISE_THREADS env var >
// hardware concurrency. Returns at least 1.
unsigned resolve_threads(unsigned requested = 0);

// Runs fn(i) for i in [0, n). Work items must write only to their own output
// slots; results are then independent of scheduling, so any thread count
// yields identical output. Runs inline when one thread is resolved.
void parallel_for(std::size_t n, unsigned threads,
                  const std::function<void(std::size_t)>& fn);

}  // namespace tiltwise

#endif
