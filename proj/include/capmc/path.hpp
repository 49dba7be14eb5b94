#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "capmc/measure.hpp"

namespace capmc {

enum class ProcessKind { brownian, stable };

/// Positions on the uniform grid t_i = i * horizon / n_steps, i = 0..n_steps.
struct PathSample {
    int dim = 1;
    std::size_t n_steps = 0;
    double horizon = 1.0;
    std::vector<double> positions;  // (n_steps + 1) x dim, row-major
    std::vector<double> start;
    std::uint64_t seed = 0;
    ProcessKind process = ProcessKind::brownian;
    double alpha = 2.0;

    double step() const { return horizon / static_cast<double>(n_steps); }
    double time(std::size_t i) const { return static_cast<double>(i) * step(); }
    std::span<const double> point(std::size_t i) const {
        return {positions.data() + i * static_cast<std::size_t>(dim), static_cast<std::size_t>(dim)};
    }
    /// Coordinate series of a one-dimensional path.
    std::span<const double> values() const { return positions; }
};

/// Brownian motion started at `start` (origin when empty); Gaussian increments of
/// per-coordinate variance horizon / n_steps.
PathSample sample_brownian(int dim, std::size_t n_steps, double horizon, std::uint64_t seed,
                           std::span<const double> start = {});

/// Symmetric alpha-stable process with E exp(i lambda.(X_t - x)) = exp(-|lambda|^alpha t),
/// realized as X_t = x + W(2 S_t) for an (alpha/2)-stable subordinator S.
PathSample sample_stable(double alpha, int dim, std::size_t n_steps, double horizon,
                         std::span<const double> start, std::uint64_t seed);

/// One draw of the positive (beta)-stable law with E exp(-u S) = exp(-u^beta), 0 < beta < 1
/// (Kanter / Chambers-Mallows-Stuck representation).
template <class Engine>
double positive_stable(double beta, Engine& eng);

struct Interval {
    double lo;
    double hi;
    double length() const { return hi - lo; }
};

/// Zero set of a one-dimensional path, resolved on the grid.
struct ZeroSetSample {
    std::vector<double> zero_times;    // sorted
    std::vector<Interval> excursions;  // maximal open intervals of [0, horizon] \ Z, sorted
    double horizon = 1.0;
};

ZeroSetSample zero_set(const PathSample& path);

/// Number of excursion intervals longer than delta.
std::size_t excursion_count(const ZeroSetSample& zs, double delta);

/// Occupation-band estimate of local time at zero:
/// l(t_i) = (1 / 2h) * step * #{1 <= k <= i : |B_k| <= h}.
struct LocalTimeProfile {
    double step = 0.0;
    double horizon = 1.0;
    double bandwidth = 0.0;
    std::vector<double> values;  // values[i] at t_i

    /// Linear interpolation, clamped to [0, horizon].
    double at(double t) const;
    double final_value() const { return values.empty() ? 0.0 : values.back(); }
};

/// h <= 0 selects the diffusive default sqrt(step).
LocalTimeProfile local_time_profile(const PathSample& path, double bandwidth = 0.0);

/// Atoms at positions[k * stride], k = 1..n_steps/stride, each of weight stride * step
/// (left-open Riemann sum). stride must divide n_steps.
WeightedMeasure occupation_measure(const PathSample& path, std::size_t stride = 1);

/// Measure on the time axis: an atom at t_k for every k >= 1 with |B_k| <= h, weight step / (2h).
WeightedMeasure local_time_measure(const PathSample& path, double bandwidth);

/// CSV `t,x1,...,xd` with header.
void write_path_csv(const PathSample& path, std::ostream& os);

}  // namespace capmc

#include "capmc/path_impl.hpp"
