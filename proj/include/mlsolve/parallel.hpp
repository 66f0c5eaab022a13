#pragma once

// Loop driver shared by the path, certification and amplitude kernels.
// workers == 1 runs the plain serial loop (the reference path); anything
// else hands the iterations to OpenMP with dynamic scheduling.

#include <cstddef>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace mlsolve {

inline int available_workers()
{
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

/// f(i) for i in [0, n). f must only write to slot i of its outputs.
template <class F>
void parallel_for(std::size_t n, int workers, F&& f)
{
    if (workers == 1 || n < 2) {
        for (std::size_t i = 0; i < n; ++i)
            f(i);
        return;
    }
#ifdef _OPENMP
    const int threads = workers <= 0 ? omp_get_max_threads() : workers;
    const long long count = static_cast<long long>(n);
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
    for (long long i = 0; i < count; ++i)
        f(static_cast<std::size_t>(i));
#else
    for (std::size_t i = 0; i < n; ++i)
        f(i);
#endif
}

} // namespace mlsolve
