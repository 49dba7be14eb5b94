#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "capmc/dyadic.hpp"
#include "capmc/kernel.hpp"
#include "capmc/measure.hpp"

namespace capmc {

enum class CapacityMethod { upper_bound, equilibrium, reference_square, reference_cantor, sausage };

const char* to_string(CapacityMethod m);

/// Capacity in units of 1/energy, with whatever diagnostics the method produces.
/// Absolute constants of the comparability statements are set to 1.
struct CapacityEstimate {
    double value = 0.0;
    CapacityMethod method = CapacityMethod::upper_bound;
    std::string kernel;
    std::size_t iterations = 0;
    double gap = 0.0;
    int truncation_level = 0;
    double partial_sum = 0.0;
    bool divergent = false;
    bool converged = true;
};

/// [sum_{n in [n_first, n_last]} (f(s_n) - f(2 s_n)) / N_n]^-1 with s_n = side 2^-n.
/// box_counts[n] is N_n; every N_n in range must be >= 1.
CapacityEstimate capacity_upper_bound(std::span<const std::size_t> box_counts, const Kernel& k, int n_first,
                                      int n_last, double side = 1.0);

/// [sum_{n=0}^{n_max} (f(2^-n) - f(2^{1-n})) 4^-n]^-1, the unit square up to constants.
/// Value 0 and `divergent` when the terms stop decaying; +inf when every increment vanishes.
CapacityEstimate reference_square_capacity(const Kernel& k, int n_max);

/// Same with weights 2^{-n/2}: the middle-half Cantor set {sum b_n 4^-n : b_n in {0,3}}.
CapacityEstimate reference_cantor_capacity(const Kernel& k, int n_max);

struct EquilibriumResult {
    std::vector<double> weights;
    double energy = 0.0;
    double gap = 0.0;  // Frank-Wolfe duality gap at the returned iterate
    std::size_t iterations = 0;
    bool converged = false;
    /// Smallest d^T K d / |d|^2 met along search directions; negative means K is indefinite there.
    double min_rayleigh = 0.0;

    CapacityEstimate capacity(const Kernel& k) const;
};

/// Minimizes w^T K w over the probability simplex, K_ij = f(|x_i - x_j|), by Frank-Wolfe
/// with away steps and exact line search. Stops when gap <= tol * energy.
/// Throws std::invalid_argument for kernels with f(0) = +inf.
EquilibriumResult equilibrium_measure(const PointSet& points, const Kernel& k, double tol = 1e-6,
                                      std::size_t max_iters = 50000);

struct SausageCapacity {
    CapacityEstimate lower;  // 1 / dyadic energy of the normalized measure in f_eps
    CapacityEstimate upper;  // box-count bound over levels whose cubes are not finer than eps
    int eps_level = 0;
};

/// Two-sided capacity of the eps-sausage of the support of `hist`, computed in f_eps.
/// eps is in the histogram's physical units and must be >= 2 side(n_max).
SausageCapacity sausage_capacity(const DyadicHistogram& hist, const Kernel& k, double eps, int d);

struct HittingBracket {
    double lower = 0.0;
    double upper = 0.0;
    bool clamped = false;  // upper clamped to 1 (including a start on the set)
};

/// (k_lo cap, min(1, k_hi cap)) for a process whose potential density lies in [k_lo, k_hi]
/// over the target set.
HittingBracket hitting_probability_bracket(const CapacityEstimate& cap, double k_lo, double k_hi);

}  // namespace capmc
