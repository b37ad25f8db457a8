#pragma once

#include <cstddef>
#include <functional>

namespace ddn {

/// Caps the worker threads used inside operations. 0 restores the default.
void set_num_threads(int n);
int num_threads();

/// Runs body(i) for i in [0, n). Work is split across threads, but every
/// reduction in the library combines per-index partials in index order, so
/// results do not depend on the thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace ddn
