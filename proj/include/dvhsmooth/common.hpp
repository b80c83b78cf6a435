#pragma once

#include <functional>
#include <string_view>

namespace dvhsmooth {

enum class Side { Left, Right };

std::string_view to_string(Side side) noexcept;

/// Worker count for internal parallel loops: DVHSMOOTH_THREADS when set to a
/// positive integer, otherwise std::thread::hardware_concurrency().
int worker_threads();

/// Runs body(i) for i in [0, n) on worker_threads() threads. Callers store
/// per-index results and reduce them in index order, so the outcome does not
/// depend on the thread count.
void parallel_for(int n, const std::function<void(int)>& body);

}  // namespace dvhsmooth
