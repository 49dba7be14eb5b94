#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <string>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "capmc/measure.hpp"

namespace capmc {

/// An atom fell outside the normalization box.
class BoxEscape : public std::out_of_range {
public:
    BoxEscape(std::size_t atom, const std::string& what) : std::out_of_range(what), atom_(atom) {}
    std::size_t atom() const { return atom_; }

private:
    std::size_t atom_;
};

/// Affine map x -> (x - origin) / side onto the unit cube.
struct BoxMap {
    std::vector<double> origin;  // empty means the zero vector
    double side = 1.0;

    /// [-half_width, half_width]^dim.
    static BoxMap centered(int dim, double half_width);
};

/// Dyadic cube [j 2^-n, (j+1) 2^-n) in unit-cube coordinates.
struct CubeIndex {
    int level = 0;
    std::vector<std::int64_t> coords;
    bool operator==(const CubeIndex&) const = default;
};

/// Morton (bit-interleaved) key of integer cube coordinates at a level; the parent of
/// key k is k >> dim, so sorted keys keep every cube's descendants contiguous.
std::uint64_t morton_encode(std::span<const std::int64_t> coords, int level);
std::vector<std::int64_t> morton_decode(std::uint64_t key, int dim, int level);

/// Per-level sparse masses nu(Q), Q in D_n, n = 0..n_max.
class DyadicHistogram {
public:
    struct Level {
        std::vector<std::uint64_t> keys;  // sorted, unique
        std::vector<double> masses;
    };

    int dim() const { return dim_; }
    int n_max() const { return static_cast<int>(levels_.size()) - 1; }
    double total_mass() const { return total_mass_; }
    const BoxMap& box() const { return box_; }
    /// Side length of a level-n cube in the caller's coordinates.
    double side(int n) const;
    const Level& level(int n) const;

    double mass(const CubeIndex& q) const;
    std::vector<CubeIndex> cubes(int n) const;

    /// Parent-child mass consistency, recomputed with the build's summation order.
    bool consistent() const;

private:
    friend DyadicHistogram bin_measure(const WeightedMeasure&, int, const BoxMap&);
    friend DyadicHistogram bin_points(const PointSet&, int, const BoxMap&);
    int dim_ = 1;
    double total_mass_ = 0.0;
    BoxMap box_;
    std::vector<Level> levels_;
};

/// Bins atoms into levels 0..n_max. Throws BoxEscape naming the first atom outside the box.
DyadicHistogram bin_measure(const WeightedMeasure& m, int n_max, const BoxMap& box = {});

/// Unit-mass-per-point histogram, for box counts of point sets.
DyadicHistogram bin_points(const PointSet& p, int n_max, const BoxMap& box = {});

CubeIndex cube_of(std::span<const double> unit_point, int level);

/// Number of level-n cubes with positive mass.
std::size_t box_count(const DyadicHistogram& h, int n);

/// Sum over level-n cubes of nu(Q)^2.
double sum_squares(const DyadicHistogram& h, int n);

/// CSV `level,j1,...,jd,mass`.
void write_histogram_csv(const DyadicHistogram& h, std::ostream& os);

/// Exact nearest-neighbour queries over a fixed point cloud.
///
/// Points are sorted by Morton key over their bounding cube, so every dyadic cell is a
/// contiguous range. A query walks the cell hierarchy best-first by box distance and
/// scans only the points of cells that can still beat the current best and the cutoff.
class PointIndex {
public:
    explicit PointIndex(PointSet points, int leaf_size = 8);

    int dim() const { return points_.dim; }
    std::size_t size() const { return points_.size(); }
    const PointSet& points() const { return points_; }

    /// Minimum Euclidean distance from x to the cloud if it is <= cutoff, else nullopt.
    std::optional<double> nearest_distance(std::span<const double> x,
                                           double cutoff = std::numeric_limits<double>::infinity()) const;

    /// Maximum distance from x to the cloud (linear scan).
    double farthest_distance(std::span<const double> x) const;

private:
    struct Cell {
        std::uint64_t key;
        std::uint32_t begin;  // point range
        std::uint32_t end;
        std::uint32_t child;  // first child in the next level; children run to the next cell's child
    };
    double box_distance_sq(std::span<const double> x, int level, std::uint64_t key) const;

    PointSet points_;
    std::vector<double> origin_;
    double side_ = 1.0;
    int depth_ = 0;
    std::vector<std::vector<Cell>> cells_;  // per level, sorted by key
};

}  // namespace capmc
