#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "capmc/dyadic.hpp"
#include "capmc/kernel.hpp"
#include "capmc/measure.hpp"
#include "capmc/path.hpp"

namespace capmc {

/// A requested scale is finer than the data resolves.
class ResolutionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// sum_i sum_j w_i w_j f(|x_i - x_j|), diagonal included. +inf when f(0) = +inf.
/// O(N^2); blocked over rows with a fixed-order reduction.
double direct_energy(const WeightedMeasure& m, const Kernel& k);

/// S_sigma(nu) = sum_i sum_j w_i w_j exp(-|x_i - x_j|^2 / (2 sigma^2)), exact.
double gaussian_energy(const WeightedMeasure& m, double sigma);

struct FastGaussianEnergy {
    double value = 0.0;
    /// Certified bound on |value - gaussian_energy|: (total mass)^2 exp(-(c-1)^2 / 2).
    double error_bound = 0.0;
    std::size_t pairs = 0;  // unordered atom pairs evaluated, diagonal excluded
    std::size_t cells = 0;
};

/// Cell-list evaluation of S_sigma: atoms are bucketed into cubes of side sigma and only
/// cube pairs whose gap is at most (cutoff - 1) sigma are summed exactly; every omitted pair
/// is farther apart than (cutoff - 1) sigma.
/// `resolution` (optional) rejects sigma < 2 * resolution.
FastGaussianEnergy gaussian_energy_fast(const WeightedMeasure& m, double sigma, double cutoff = 6.0,
                                        double resolution = 0.0);

struct DyadicEnergy {
    double value = 0.0;
    /// f(0) = +inf: the diagonal tail below level n_max was dropped.
    bool truncated = false;
};

/// f(2 s) m^2 + sum_{n=0}^{n_max} (f(s_n) - f(2 s_n)) sum_Q nu(Q)^2 + (f(0) - f(s_{n_max})) sum_Q nu(Q)^2
/// with s_n the physical side of a level-n cube. The first term carries the mass at distances
/// beyond the level-0 cube and the last the atoms' diagonal; a single atom yields f(0) exactly.
DyadicEnergy dyadic_energy(const DyadicHistogram& h, const Kernel& k);

struct ScaledSRow {
    double sigma = 0.0;
    double s_value = 0.0;
    double scaled = 0.0;  // sigma^-d S_sigma
    double error_bound = 0.0;
};

/// S_sigma and sigma^-d S_sigma along a strictly decreasing sigma grid. With a cutoff the
/// cell-list evaluator is used and its error bounds reported; otherwise the exact sum.
std::vector<ScaledSRow> scaled_S_profile(const WeightedMeasure& m, std::span<const double> sigmas, int d,
                                         std::optional<double> cutoff = std::nullopt);

/// L_delta = sum_{j=0}^{ceil(T/delta)} (l((j+1) delta) - l(j delta))^2.
double quadratic_variation(const LocalTimeProfile& lt, double delta);

namespace serial {

/// Reference double loops, no blocking; kept as the oracle for the parallel kernels.
double direct_energy(const WeightedMeasure& m, const Kernel& k);
double gaussian_energy(const WeightedMeasure& m, double sigma);

}  // namespace serial

}  // namespace capmc
