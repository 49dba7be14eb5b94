#include "capmc/energy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "capmc/parallel.hpp"
#include "capmc/records.hpp"
#include "compensated.hpp"

namespace capmc {

namespace {

constexpr std::size_t kRowBlock = 64;

bool has_mass(const WeightedMeasure& m) {
    return std::any_of(m.weights.begin(), m.weights.end(), [](double w) { return w > 0.0; });
}

template <class PairFn>
double full_double_sum(const WeightedMeasure& m, PairFn&& f) {
    const std::size_t n = m.size();
    return blocked_sum(n, kRowBlock, [&](std::size_t i0, std::size_t i1) {
        double block = 0.0;
        for (std::size_t i = i0; i < i1; ++i) {
            const auto xi = m.point(i);
            double row = 0.0;
            for (std::size_t j = 0; j < n; ++j) row += m.weights[j] * f(squared_distance(xi, m.point(j)));
            block += m.weights[i] * row;
        }
        return block;
    });
}

}  // namespace

double direct_energy(const WeightedMeasure& m, const Kernel& k) {
    if (!has_mass(m)) return 0.0;
    if (!k.bounded()) return std::numeric_limits<double>::infinity();
    return full_double_sum(m, [&](double r2) { return k.eval(std::sqrt(r2)); });
}

double gaussian_energy(const WeightedMeasure& m, double sigma) {
    if (!(sigma > 0.0)) throw std::invalid_argument("sigma must be positive");
    const double a = -0.5 / (sigma * sigma);
    return full_double_sum(m, [a](double r2) { return std::exp(a * r2); });
}

namespace serial {

double direct_energy(const WeightedMeasure& m, const Kernel& k) {
    if (!has_mass(m)) return 0.0;
    if (!k.bounded()) return std::numeric_limits<double>::infinity();
    double s = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i)
        for (std::size_t j = 0; j < m.size(); ++j)
            s += m.weights[i] * m.weights[j] * k.eval(std::sqrt(squared_distance(m.point(i), m.point(j))));
    return s;
}

double gaussian_energy(const WeightedMeasure& m, double sigma) {
    if (!(sigma > 0.0)) throw std::invalid_argument("sigma must be positive");
    const double a = -0.5 / (sigma * sigma);
    double s = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i)
        for (std::size_t j = 0; j < m.size(); ++j)
            s += m.weights[i] * m.weights[j] * std::exp(a * squared_distance(m.point(i), m.point(j)));
    return s;
}

}  // namespace serial

// --- cell-list Gaussian sum ----------------------------------------------------------------

namespace {

/// Atoms sorted lexicographically by cell coordinates, with the distinct cells as ranges.
struct CellList {
    int dim = 1;
    std::vector<std::int64_t> cell_coords;  // per distinct cell, row-major
    std::vector<std::size_t> cell_begin;    // size cells + 1
    std::vector<double> coords;             // atoms, sorted
    std::vector<double> weights;

    std::size_t cells() const { return cell_begin.size() - 1; }
    const std::int64_t* cell(std::size_t c) const { return cell_coords.data() + c * static_cast<std::size_t>(dim); }
};

CellList build_cells(const WeightedMeasure& m, double width) {
    const std::size_t d = static_cast<std::size_t>(m.dim);
    const std::size_t n = m.size();
    std::vector<std::int64_t> key(n * d);
    for (std::size_t i = 0; i < n * d; ++i) {
        const double q = std::floor(m.coords[i] / width);
        if (!(std::abs(q) < 4e18)) throw ResolutionError("atom coordinates too large for the cell grid");
        key[i] = static_cast<std::int64_t>(q);
    }
    auto less = [&](std::size_t a, std::size_t b) {
        return std::lexicographical_compare(key.begin() + static_cast<std::ptrdiff_t>(a * d),
                                            key.begin() + static_cast<std::ptrdiff_t>((a + 1) * d),
                                            key.begin() + static_cast<std::ptrdiff_t>(b * d),
                                            key.begin() + static_cast<std::ptrdiff_t>((b + 1) * d));
    };
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), less);

    CellList cl;
    cl.dim = m.dim;
    cl.coords.resize(n * d);
    cl.weights.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t src = order[i];
        std::copy_n(m.coords.begin() + static_cast<std::ptrdiff_t>(src * d), d,
                    cl.coords.begin() + static_cast<std::ptrdiff_t>(i * d));
        cl.weights[i] = m.weights[src];
        if (i == 0 || less(order[i - 1], src)) {
            cl.cell_begin.push_back(i);
            cl.cell_coords.insert(cl.cell_coords.end(), key.begin() + static_cast<std::ptrdiff_t>(src * d),
                                  key.begin() + static_cast<std::ptrdiff_t>((src + 1) * d));
        }
    }
    cl.cell_begin.push_back(n);
    return cl;
}

/// Row offsets (first d-1 coordinates) with the reach r along the last axis, i.e. the cube
/// offsets D with sqrt(sum max(|D_k| - 1, 0)^2) <= reach. Only rows that are lexicographically
/// positive are kept, plus the zero row, so each unordered cell pair is visited once.
struct Row {
    std::vector<std::int64_t> offset;
    std::int64_t reach;
};

std::vector<Row> half_stencil(int dim, double reach) {
    const std::int64_t span = static_cast<std::int64_t>(std::floor(reach)) + 1;
    const std::size_t m = static_cast<std::size_t>(dim - 1);
    std::vector<Row> rows;
    std::vector<std::int64_t> off(m, -span);
    auto gap = [](std::int64_t v) {
        const double g = std::max<double>(static_cast<double>(std::abs(v)) - 1.0, 0.0);
        return g * g;
    };
    while (true) {
        bool positive = true;
        for (std::size_t k = 0; k < m; ++k)
            if (off[k] != 0) {
                positive = off[k] > 0;
                break;
            }
        double g2 = 0.0;
        for (auto v : off) g2 += gap(v);
        const double left = reach * reach - g2;
        if (positive && left >= 0.0) rows.push_back({off, static_cast<std::int64_t>(std::floor(std::sqrt(left))) + 1});
        std::size_t k = 0;
        for (; k < m; ++k) {
            if (++off[k] <= span) break;
            off[k] = -span;
        }
        if (k == m) break;
    }
    return rows;
}

/// First cell at or after (row, last) in lexicographic order.
std::size_t seek(const CellList& cl, const std::int64_t* row, std::size_t row_len, std::int64_t last) {
    std::size_t lo = 0, hi = cl.cells();
    while (lo < hi) {
        const std::size_t mid = (lo + hi) / 2;
        const std::int64_t* c = cl.cell(mid);
        int cmp = 0;
        for (std::size_t k = 0; k < row_len && cmp == 0; ++k) cmp = c[k] < row[k] ? -1 : (c[k] > row[k] ? 1 : 0);
        if (cmp == 0) cmp = c[row_len] < last ? -1 : (c[row_len] > last ? 1 : 0);
        if (cmp < 0)
            lo = mid + 1;
        else
            hi = mid;
    }
    return lo;
}

struct Partial {
    double value = 0.0;
    std::size_t pairs = 0;
};

}  // namespace

FastGaussianEnergy gaussian_energy_fast(const WeightedMeasure& m, double sigma, double cutoff, double resolution) {
    if (!(sigma > 0.0)) throw std::invalid_argument("sigma must be positive");
    if (!(cutoff >= 4.0)) throw std::invalid_argument("cutoff must be >= 4");
    if (resolution > 0.0 && sigma < 2.0 * resolution)
        throw ResolutionError("sigma = " + format_number(sigma) + " is below 2 * resolution = " +
                              format_number(2.0 * resolution));

    FastGaussianEnergy out;
    const double mass = m.total_mass();
    out.error_bound = mass * mass * std::exp(-0.5 * (cutoff - 1.0) * (cutoff - 1.0));
    if (m.size() == 0) return out;

    const CellList cl = build_cells(m, sigma);
    out.cells = cl.cells();
    const std::size_t d = static_cast<std::size_t>(m.dim);
    const std::vector<Row> rows = half_stencil(m.dim, cutoff - 1.0);
    const double a = -0.5 / (sigma * sigma);

    constexpr std::size_t kCellBlock = 256;
    const std::size_t ncells = cl.cells();
    const std::size_t nblocks = (ncells + kCellBlock - 1) / kCellBlock;
    std::vector<Partial> partial(nblocks);
    const long long nb = static_cast<long long>(nblocks);

#pragma omp parallel for schedule(dynamic, 1) if (!in_parallel_region() && nblocks > 1)
    for (long long b = 0; b < nb; ++b) {
        const std::size_t c0 = static_cast<std::size_t>(b) * kCellBlock;
        const std::size_t c1 = std::min(c0 + kCellBlock, ncells);
        std::vector<std::int64_t> target(d);
        double block = 0.0;
        std::size_t pairs = 0;
        for (std::size_t c = c0; c < c1; ++c) {
            const std::int64_t* here = cl.cell(c);
            const std::size_t a0 = cl.cell_begin[c], a1 = cl.cell_begin[c + 1];
            double cross = 0.0;
            double diag = 0.0;
            // Inside the cell: diagonal and i < j.
            for (std::size_t i = a0; i < a1; ++i) {
                const double* xi = &cl.coords[i * d];
                diag += cl.weights[i] * cl.weights[i];
                double row = 0.0;
                for (std::size_t j = i + 1; j < a1; ++j) {
                    const double* xj = &cl.coords[j * d];
                    double r2 = 0.0;
                    for (std::size_t k = 0; k < d; ++k) r2 += (xi[k] - xj[k]) * (xi[k] - xj[k]);
                    row += cl.weights[j] * std::exp(a * r2);
                }
                cross += cl.weights[i] * row;
                pairs += a1 - i - 1;
            }
            for (const Row& r : rows) {
                for (std::size_t k = 0; k + 1 < d; ++k) target[k] = here[k] + r.offset[k];
                bool zero_row = true;
                for (auto v : r.offset) zero_row = zero_row && v == 0;
                const std::int64_t lo = here[d - 1] + (zero_row ? 1 : -r.reach);
                const std::int64_t hi = here[d - 1] + r.reach;
                const std::size_t s0 = seek(cl, target.data(), d - 1, lo);
                const std::size_t s1 = seek(cl, target.data(), d - 1, hi + 1);
                if (s0 >= s1) continue;
                const std::size_t j0 = cl.cell_begin[s0], j1 = cl.cell_begin[s1];
                for (std::size_t i = a0; i < a1; ++i) {
                    const double* xi = &cl.coords[i * d];
                    double row = 0.0;
                    for (std::size_t j = j0; j < j1; ++j) {
                        const double* xj = &cl.coords[j * d];
                        double r2 = 0.0;
                        for (std::size_t k = 0; k < d; ++k) r2 += (xi[k] - xj[k]) * (xi[k] - xj[k]);
                        row += cl.weights[j] * std::exp(a * r2);
                    }
                    cross += cl.weights[i] * row;
                }
                pairs += (a1 - a0) * (j1 - j0);
            }
            block += diag + 2.0 * cross;
        }
        partial[static_cast<std::size_t>(b)] = {block, pairs};
    }

    std::vector<double> values(nblocks);
    for (std::size_t b = 0; b < nblocks; ++b) {
        values[b] = partial[b].value;
        out.pairs += partial[b].pairs;
    }
    out.value = tree_reduce(std::move(values));
    return out;
}

// --- dyadic decomposition --------------------------------------------------------------------

DyadicEnergy dyadic_energy(const DyadicHistogram& h, const Kernel& k) {
    DyadicEnergy out;
    const double mass = h.total_mass();
    const double inf = std::numeric_limits<double>::infinity();
    detail::CompensatedSum s;
    s.add(k.eval(2.0 * h.side(0)) * mass * mass);
    for (int n = 0; n <= h.n_max(); ++n) {
        const double ss = sum_squares(h, n);
        const double fine = k.eval(h.side(n));
        if (!std::isfinite(fine)) {
            out.value = ss > 0.0 ? inf : s.value();
            return out;
        }
        s.add((fine - k.eval(2.0 * h.side(n))) * ss);
    }
    const double f0 = k.value_at_zero();
    if (std::isfinite(f0))
        s.add((f0 - k.eval(h.side(h.n_max()))) * sum_squares(h, h.n_max()));
    else
        out.truncated = true;
    out.value = s.value();
    return out;
}

std::vector<ScaledSRow> scaled_S_profile(const WeightedMeasure& m, std::span<const double> sigmas, int d,
                                         std::optional<double> cutoff) {
    for (std::size_t i = 0; i < sigmas.size(); ++i) {
        if (!(sigmas[i] > 0.0)) throw std::invalid_argument("sigmas must be positive");
        if (i > 0 && !(sigmas[i] < sigmas[i - 1])) throw std::invalid_argument("sigmas must be strictly decreasing");
    }
    std::vector<ScaledSRow> out;
    for (double s : sigmas) {
        ScaledSRow row;
        row.sigma = s;
        if (cutoff) {
            const auto fast = gaussian_energy_fast(m, s, *cutoff);
            row.s_value = fast.value;
            row.error_bound = fast.error_bound;
        } else {
            row.s_value = gaussian_energy(m, s);
        }
        row.scaled = row.s_value * std::pow(s, -d);
        out.push_back(row);
    }
    return out;
}

double quadratic_variation(const LocalTimeProfile& lt, double delta) {
    if (!(delta >= 2.0 * lt.step))
        throw ResolutionError("delta = " + format_number(delta) + " must be >= 2 * step = " + format_number(2.0 * lt.step));
    const auto blocks = static_cast<std::size_t>(std::ceil(lt.horizon / delta));
    detail::CompensatedSum s;
    for (std::size_t j = 0; j <= blocks; ++j) {
        const double inc = lt.at(static_cast<double>(j + 1) * delta) - lt.at(static_cast<double>(j) * delta);
        s.add(inc * inc);
    }
    return s.value();
}

}  // namespace capmc
