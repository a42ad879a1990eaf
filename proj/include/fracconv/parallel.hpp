#pragma once

#include <cstddef>
#include <functional>
#include <span>

namespace fracconv {

/// Worker count: FRACCONV_THREADS when set and positive, else hardware concurrency.
std::size_t thread_count();

/// Runs body(i) for i in [0, n) across worker threads. Each index is processed by exactly
/// one thread; the body must not share mutable state across indices.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

/// Pairwise (cascade) summation; the result does not depend on thread count.
double pairwise_sum(std::span<const double> values);

}  // namespace fracconv
