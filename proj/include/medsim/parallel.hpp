#pragma once

#include <cstddef>
#include <functional>

namespace medsim {

// Worker cap for library-level parallel loops; 0 means hardware concurrency.
void set_thread_count(unsigned n);
unsigned thread_count();

// Runs body(i) for i in [0, n). Work is claimed dynamically, so callers must
// write results into per-index slots and reduce in index order afterwards.
// Nested calls run serially on the calling worker.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace medsim
