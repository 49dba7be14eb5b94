#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace capmc {

/// Finite atomic measure in R^dim: row-major coordinates plus one weight per atom.
struct WeightedMeasure {
    int dim = 1;
    std::vector<double> coords;
    std::vector<double> weights;

    WeightedMeasure() = default;
    WeightedMeasure(int dim_, std::vector<double> coords_, std::vector<double> weights_);

    std::size_t size() const { return weights.size(); }
    std::span<const double> point(std::size_t i) const {
        return {coords.data() + i * static_cast<std::size_t>(dim), static_cast<std::size_t>(dim)};
    }
    double total_mass() const;

    /// Same atoms, weights divided by the total mass.
    WeightedMeasure normalized() const;
};

/// Bare point cloud (row-major), used by the spatial index and the equilibrium solver.
struct PointSet {
    int dim = 1;
    std::vector<double> coords;

    std::size_t size() const { return dim > 0 ? coords.size() / static_cast<std::size_t>(dim) : 0; }
    std::span<const double> point(std::size_t i) const {
        return {coords.data() + i * static_cast<std::size_t>(dim), static_cast<std::size_t>(dim)};
    }
};

double squared_distance(std::span<const double> a, std::span<const double> b);

}  // namespace capmc
