#pragma once

#include <functional>

namespace ddlab {

/// Worker count for per-subdomain loops; 1 disables threading.
void set_worker_threads(int n);
int worker_threads();

/// Runs fn(0..count-1); bodies must write disjoint outputs. Reductions stay
/// with the caller so results are independent of the thread count.
void parallel_subdomains(int count, const std::function<void(int)>& fn);

}  // namespace ddlab
