#pragma once

#include <cstddef>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace capmc {

inline int worker_count() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

inline void set_worker_count(int n) {
#ifdef _OPENMP
    if (n > 0) omp_set_num_threads(n);
#else
    (void)n;
#endif
}

inline bool in_parallel_region() {
#ifdef _OPENMP
    return omp_in_parallel() != 0;
#else
    return false;
#endif
}

/// Pairwise sum in a fixed tree order.
inline double tree_reduce(std::vector<double> v) {
    if (v.empty()) return 0.0;
    for (std::size_t width = 1; width < v.size(); width *= 2)
        for (std::size_t i = 0; i + width < v.size(); i += 2 * width) v[i] += v[i + width];
    return v[0];
}

/// Sums block(i0, i1) over fixed-size blocks of [0, n), in parallel when not already inside
/// a parallel region. Block boundaries and reduction order do not depend on the thread count.
template <class BlockFn>
double blocked_sum(std::size_t n, std::size_t block, BlockFn&& fn) {
    const std::size_t nblocks = (n + block - 1) / block;
    std::vector<double> partial(nblocks, 0.0);
    const long long nb = static_cast<long long>(nblocks);
#pragma omp parallel for schedule(dynamic, 1) if (!in_parallel_region() && nblocks > 1)
    for (long long b = 0; b < nb; ++b) {
        const std::size_t i0 = static_cast<std::size_t>(b) * block;
        const std::size_t i1 = i0 + block < n ? i0 + block : n;
        partial[static_cast<std::size_t>(b)] = fn(i0, i1);
    }
    return tree_reduce(std::move(partial));
}

}  // namespace capmc
