#include "capmc/dyadic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <queue>

#include "capmc/records.hpp"
#include "compensated.hpp"

namespace capmc {

namespace {

constexpr int kKeyBits = 62;

void check_key_width(int dim, int level) {
    if (dim < 1) throw std::invalid_argument("dyadic dimension must be >= 1");
    if (level < 0) throw std::invalid_argument("dyadic level must be >= 0");
    if (level * dim > kKeyBits)
        throw std::invalid_argument("dyadic level " + std::to_string(level) + " in dimension " + std::to_string(dim) +
                                    " exceeds the " + std::to_string(kKeyBits) + "-bit cube key");
}

double origin_at(const BoxMap& box, std::size_t k) { return box.origin.empty() ? 0.0 : box.origin[k]; }

/// Finest-level keys of every atom, with BoxEscape for atoms outside [0,1)^d.
std::vector<std::uint64_t> finest_keys(const std::vector<double>& coords, int dim, int n_max, const BoxMap& box) {
    if (!box.origin.empty() && box.origin.size() != static_cast<std::size_t>(dim))
        throw std::invalid_argument("box origin has the wrong dimension");
    if (!(box.side > 0.0)) throw std::invalid_argument("box side must be positive");
    const std::size_t d = static_cast<std::size_t>(dim);
    const std::size_t n = coords.size() / d;
    const double cells = std::ldexp(1.0, n_max);
    const std::int64_t top = (std::int64_t{1} << n_max) - 1;
    std::vector<std::uint64_t> keys(n);
    std::vector<std::int64_t> j(d);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < d; ++k) {
            const double u = (coords[i * d + k] - origin_at(box, k)) / box.side;
            if (!(u >= 0.0 && u < 1.0))
                throw BoxEscape(i, "atom " + std::to_string(i) + " lies outside the unit box (coordinate " +
                                       std::to_string(k) + " maps to " + format_number(u) + ")");
            j[k] = std::min(static_cast<std::int64_t>(u * cells), top);
        }
        keys[i] = morton_encode(j, n_max);
    }
    return keys;
}

}  // namespace

BoxMap BoxMap::centered(int dim, double half_width) {
    return BoxMap{std::vector<double>(static_cast<std::size_t>(dim), -half_width), 2.0 * half_width};
}

std::uint64_t morton_encode(std::span<const std::int64_t> coords, int level) {
    std::uint64_t key = 0;
    for (int b = level - 1; b >= 0; --b)
        for (std::int64_t c : coords) key = (key << 1) | static_cast<std::uint64_t>((c >> b) & 1);
    return key;
}

std::vector<std::int64_t> morton_decode(std::uint64_t key, int dim, int level) {
    std::vector<std::int64_t> c(static_cast<std::size_t>(dim), 0);
    for (int b = 0; b < level; ++b)
        for (int k = dim - 1; k >= 0; --k) {
            c[static_cast<std::size_t>(k)] |= static_cast<std::int64_t>(key & 1) << b;
            key >>= 1;
        }
    return c;
}

double DyadicHistogram::side(int n) const { return std::ldexp(box_.side, -n); }

const DyadicHistogram::Level& DyadicHistogram::level(int n) const {
    if (n < 0 || n > n_max())
        throw std::out_of_range("level " + std::to_string(n) + " outside [0, " + std::to_string(n_max()) + "]");
    return levels_[static_cast<std::size_t>(n)];
}

double DyadicHistogram::mass(const CubeIndex& q) const {
    const Level& L = level(q.level);
    if (q.coords.size() != static_cast<std::size_t>(dim_)) throw std::invalid_argument("cube has the wrong dimension");
    const std::int64_t cells = std::int64_t{1} << q.level;
    for (auto c : q.coords)
        if (c < 0 || c >= cells) return 0.0;
    const auto key = morton_encode(q.coords, q.level);
    const auto it = std::lower_bound(L.keys.begin(), L.keys.end(), key);
    return it != L.keys.end() && *it == key ? L.masses[static_cast<std::size_t>(it - L.keys.begin())] : 0.0;
}

std::vector<CubeIndex> DyadicHistogram::cubes(int n) const {
    const Level& L = level(n);
    std::vector<CubeIndex> out;
    out.reserve(L.keys.size());
    for (auto key : L.keys) out.push_back({n, morton_decode(key, dim_, n)});
    return out;
}

namespace {

/// Merges sorted (key, mass) runs into unique keys with compensated per-key sums.
DyadicHistogram::Level collapse(const std::vector<std::uint64_t>& keys, const std::vector<double>& masses, int shift) {
    DyadicHistogram::Level out;
    std::size_t i = 0;
    while (i < keys.size()) {
        const std::uint64_t k = keys[i] >> shift;
        detail::CompensatedSum s;
        for (; i < keys.size() && (keys[i] >> shift) == k; ++i) s.add(masses[i]);
        out.keys.push_back(k);
        out.masses.push_back(s.value());
    }
    return out;
}

}  // namespace

bool DyadicHistogram::consistent() const {
    for (int n = 0; n < n_max(); ++n) {
        const Level& fine = levels_[static_cast<std::size_t>(n + 1)];
        const Level parent = collapse(fine.keys, fine.masses, dim_);
        const Level& coarse = levels_[static_cast<std::size_t>(n)];
        if (parent.keys != coarse.keys || parent.masses != coarse.masses) return false;
    }
    return true;
}

namespace {

DyadicHistogram::Level build_finest(std::vector<std::uint64_t> keys, const std::vector<double>& weights) {
    std::vector<std::size_t> order(keys.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return keys[a] < keys[b]; });
    std::vector<std::uint64_t> sk(keys.size());
    std::vector<double> sm(keys.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        sk[i] = keys[order[i]];
        sm[i] = weights[order[i]];
    }
    return collapse(sk, sm, 0);
}

}  // namespace

DyadicHistogram bin_measure(const WeightedMeasure& m, int n_max, const BoxMap& box) {
    check_key_width(m.dim, n_max);
    DyadicHistogram h;
    h.dim_ = m.dim;
    h.box_ = box;
    h.levels_.resize(static_cast<std::size_t>(n_max) + 1);
    h.levels_.back() = build_finest(finest_keys(m.coords, m.dim, n_max, box), m.weights);
    for (int n = n_max - 1; n >= 0; --n) {
        const auto& fine = h.levels_[static_cast<std::size_t>(n + 1)];
        h.levels_[static_cast<std::size_t>(n)] = collapse(fine.keys, fine.masses, m.dim);
    }
    h.total_mass_ = h.levels_[0].masses.empty() ? 0.0 : h.levels_[0].masses[0];
    return h;
}

DyadicHistogram bin_points(const PointSet& p, int n_max, const BoxMap& box) {
    return bin_measure(WeightedMeasure(p.dim, p.coords, std::vector<double>(p.size(), 1.0)), n_max, box);
}

CubeIndex cube_of(std::span<const double> unit_point, int level) {
    CubeIndex q{level, {}};
    const double cells = std::ldexp(1.0, level);
    for (double u : unit_point) q.coords.push_back(static_cast<std::int64_t>(std::floor(u * cells)));
    return q;
}

std::size_t box_count(const DyadicHistogram& h, int n) {
    const auto& L = h.level(n);
    return static_cast<std::size_t>(std::count_if(L.masses.begin(), L.masses.end(), [](double x) { return x > 0.0; }));
}

double sum_squares(const DyadicHistogram& h, int n) {
    detail::CompensatedSum s;
    for (double x : h.level(n).masses) s.add(x * x);
    return s.value();
}

void write_histogram_csv(const DyadicHistogram& h, std::ostream& os) {
    os << "level";
    for (int k = 1; k <= h.dim(); ++k) os << ",j" << k;
    os << ",mass\n";
    for (int n = 0; n <= h.n_max(); ++n) {
        const auto& L = h.level(n);
        for (std::size_t i = 0; i < L.keys.size(); ++i) {
            os << n;
            for (auto c : morton_decode(L.keys[i], h.dim(), n)) os << ',' << c;
            os << ',' << format_number(L.masses[i]) << '\n';
        }
    }
}

// --- nearest-distance index ----------------------------------------------------------------

PointIndex::PointIndex(PointSet points, int leaf_size) : points_(std::move(points)) {
    const std::size_t n = points_.size();
    const std::size_t d = static_cast<std::size_t>(points_.dim);
    if (n == 0) throw std::invalid_argument("nearest-distance index needs a nonempty point set");
    if (n > std::numeric_limits<std::uint32_t>::max()) throw std::invalid_argument("point set too large for index");
    if (leaf_size < 1) throw std::invalid_argument("leaf size must be >= 1");

    origin_.assign(d, std::numeric_limits<double>::infinity());
    std::vector<double> hi(d, -std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < d; ++k) {
            origin_[k] = std::min(origin_[k], points_.coords[i * d + k]);
            hi[k] = std::max(hi[k], points_.coords[i * d + k]);
        }
    double extent = 0.0;
    for (std::size_t k = 0; k < d; ++k) extent = std::max(extent, hi[k] - origin_[k]);
    side_ = extent > 0.0 ? extent * (1.0 + 1e-12) + std::numeric_limits<double>::min() : 1.0;

    const int max_depth = std::min(20, kKeyBits / points_.dim);
    const double cells = std::ldexp(1.0, max_depth);
    const std::int64_t top = (std::int64_t{1} << max_depth) - 1;
    std::vector<std::uint64_t> keys(n);
    std::vector<std::int64_t> j(d);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < d; ++k)
            j[k] = std::clamp(static_cast<std::int64_t>((points_.coords[i * d + k] - origin_[k]) / side_ * cells),
                              std::int64_t{0}, top);
        keys[i] = morton_encode(j, max_depth);
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return keys[a] < keys[b]; });
    std::vector<double> sorted(n * d);
    std::vector<std::uint64_t> sk(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::copy_n(points_.coords.begin() + static_cast<std::ptrdiff_t>(order[i] * d), d,
                    sorted.begin() + static_cast<std::ptrdiff_t>(i * d));
        sk[i] = keys[order[i]];
    }
    points_.coords = std::move(sorted);

    // Refine until the occupied cells hold leaf_size points on average.
    auto cells_at = [&](int level) {
        std::vector<Cell> out;
        const int shift = (max_depth - level) * points_.dim;
        std::size_t i = 0;
        while (i < n) {
            const std::uint64_t k = sk[i] >> shift;
            const std::size_t b = i;
            while (i < n && (sk[i] >> shift) == k) ++i;
            out.push_back({k, static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(i), 0});
        }
        return out;
    };
    cells_.push_back(cells_at(0));
    while (depth_ < max_depth && static_cast<double>(n) / static_cast<double>(cells_.back().size()) > leaf_size) {
        ++depth_;
        cells_.push_back(cells_at(depth_));
    }
    for (int level = 0; level < depth_; ++level) {
        auto& parents = cells_[static_cast<std::size_t>(level)];
        const auto& kids = cells_[static_cast<std::size_t>(level + 1)];
        std::size_t c = 0;
        for (auto& p : parents) {
            while (c < kids.size() && (kids[c].key >> points_.dim) < p.key) ++c;
            p.child = static_cast<std::uint32_t>(c);
        }
    }
}

double PointIndex::box_distance_sq(std::span<const double> x, int level, std::uint64_t key) const {
    const auto c = morton_decode(key, points_.dim, level);
    const double w = std::ldexp(side_, -level);
    double s = 0.0;
    for (std::size_t k = 0; k < c.size(); ++k) {
        const double lo = origin_[k] + static_cast<double>(c[k]) * w;
        const double hi = lo + w;
        const double g = x[k] < lo ? lo - x[k] : (x[k] > hi ? x[k] - hi : 0.0);
        s += g * g;
    }
    return s;
}

std::optional<double> PointIndex::nearest_distance(std::span<const double> x, double cutoff) const {
    if (x.size() != static_cast<std::size_t>(points_.dim)) throw std::invalid_argument("query has the wrong dimension");
    const std::size_t d = x.size();
    double best = cutoff * cutoff;
    bool found = false;

    struct Item {
        double dist;
        int level;
        std::uint32_t cell;
        bool operator>(const Item& o) const { return dist > o.dist; }
    };
    std::priority_queue<Item, std::vector<Item>, std::greater<>> queue;
    for (std::uint32_t c = 0; c < cells_[0].size(); ++c) queue.push({box_distance_sq(x, 0, cells_[0][c].key), 0, c});

    while (!queue.empty()) {
        const Item it = queue.top();
        queue.pop();
        if (it.dist > best) break;
        const auto& level = cells_[static_cast<std::size_t>(it.level)];
        const Cell& cell = level[it.cell];
        if (it.level == depth_) {
            for (std::uint32_t i = cell.begin; i < cell.end; ++i) {
                double s = 0.0;
                for (std::size_t k = 0; k < d; ++k) {
                    const double t = points_.coords[i * d + k] - x[k];
                    s += t * t;
                }
                if (s <= best) {
                    best = s;
                    found = true;
                }
            }
            continue;
        }
        const auto& kids = cells_[static_cast<std::size_t>(it.level + 1)];
        const std::uint32_t end =
            it.cell + 1 < level.size() ? level[it.cell + 1].child : static_cast<std::uint32_t>(kids.size());
        for (std::uint32_t c = cell.child; c < end; ++c) {
            const double dist = box_distance_sq(x, it.level + 1, kids[c].key);
            if (dist <= best) queue.push({dist, it.level + 1, c});
        }
    }
    if (!found) return std::nullopt;
    return std::sqrt(best);
}

double PointIndex::farthest_distance(std::span<const double> x) const {
    double best = 0.0;
    for (std::size_t i = 0; i < size(); ++i) best = std::max(best, squared_distance(x, points_.point(i)));
    return std::sqrt(best);
}

}  // namespace capmc
