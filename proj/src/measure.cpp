#include "capmc/measure.hpp"

#include <cmath>
#include <string>

#include "capmc/parallel.hpp"

namespace capmc {

WeightedMeasure::WeightedMeasure(int dim_, std::vector<double> coords_, std::vector<double> weights_)
    : dim(dim_), coords(std::move(coords_)), weights(std::move(weights_)) {
    if (dim < 1) throw std::invalid_argument("measure dimension must be >= 1");
    if (coords.size() != weights.size() * static_cast<std::size_t>(dim))
        throw std::invalid_argument("measure: " + std::to_string(coords.size()) + " coordinates do not match " +
                                    std::to_string(weights.size()) + " atoms in dimension " + std::to_string(dim));
    for (double w : weights)
        if (!(w >= 0.0) || !std::isfinite(w)) throw std::invalid_argument("measure weights must be finite and >= 0");
}

double WeightedMeasure::total_mass() const {
    return blocked_sum(weights.size(), 4096, [&](std::size_t i0, std::size_t i1) {
        double s = 0.0;
        for (std::size_t i = i0; i < i1; ++i) s += weights[i];
        return s;
    });
}

WeightedMeasure WeightedMeasure::normalized() const {
    const double m = total_mass();
    if (!(m > 0.0)) throw std::invalid_argument("cannot normalize a measure of zero mass");
    WeightedMeasure out = *this;
    for (double& w : out.weights) w /= m;
    return out;
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        const double d = a[k] - b[k];
        s += d * d;
    }
    return s;
}

}  // namespace capmc
