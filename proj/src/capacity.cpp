#include "capmc/capacity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "capmc/energy.hpp"
#include "capmc/records.hpp"
#include "compensated.hpp"

namespace capmc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

/// Terms whose ratio stays at or above this are treated as non-decaying.
constexpr double kStallRatio = 1.0 - 1e-9;

CapacityEstimate reference_capacity(const Kernel& k, int n_max, double base, CapacityMethod method) {
    if (n_max < 0) throw std::invalid_argument("n_max must be >= 0");
    CapacityEstimate est;
    est.method = method;
    est.kernel = k.describe();
    est.truncation_level = n_max;
    detail::CompensatedSum s;
    double prev = 0.0, last = 0.0;
    for (int n = 0; n <= n_max; ++n) {
        const double t = dyadic_increment(k, n) * std::pow(base, -n);
        if (!std::isfinite(t)) {
            est.divergent = true;
            est.partial_sum = kInf;
            est.value = 0.0;
            return est;
        }
        s.add(t);
        prev = last;
        last = t;
    }
    est.partial_sum = s.value();
    if (n_max >= 1 && last > 0.0 && prev > 0.0 && last / prev >= kStallRatio) {
        est.divergent = true;
        est.value = 0.0;
        return est;
    }
    est.value = est.partial_sum > 0.0 ? 1.0 / est.partial_sum : kInf;
    return est;
}

}  // namespace

const char* to_string(CapacityMethod m) {
    switch (m) {
        case CapacityMethod::upper_bound: return "upper-bound";
        case CapacityMethod::equilibrium: return "equilibrium";
        case CapacityMethod::reference_square: return "reference-square";
        case CapacityMethod::reference_cantor: return "reference-cantor";
        case CapacityMethod::sausage: return "sausage";
    }
    return "unknown";
}

CapacityEstimate capacity_upper_bound(std::span<const std::size_t> box_counts, const Kernel& k, int n_first,
                                      int n_last, double side) {
    if (n_first < 0 || n_first > n_last) throw std::invalid_argument("capacity upper bound needs a nonempty level range");
    if (static_cast<std::size_t>(n_last) >= box_counts.size())
        throw std::invalid_argument("capacity upper bound: level " + std::to_string(n_last) + " has no box count");
    CapacityEstimate est;
    est.method = CapacityMethod::upper_bound;
    est.kernel = k.describe();
    est.truncation_level = n_last;
    detail::CompensatedSum s;
    for (int n = n_first; n <= n_last; ++n) {
        const std::size_t count = box_counts[static_cast<std::size_t>(n)];
        if (count < 1) throw std::invalid_argument("box count at level " + std::to_string(n) + " is zero");
        s.add(dyadic_increment(k, n, side) / static_cast<double>(count));
    }
    est.partial_sum = s.value();
    est.divergent = !std::isfinite(est.partial_sum);
    est.value = est.divergent ? 0.0 : (est.partial_sum > 0.0 ? 1.0 / est.partial_sum : kInf);
    return est;
}

CapacityEstimate reference_square_capacity(const Kernel& k, int n_max) {
    return reference_capacity(k, n_max, 4.0, CapacityMethod::reference_square);
}

CapacityEstimate reference_cantor_capacity(const Kernel& k, int n_max) {
    return reference_capacity(k, n_max, std::sqrt(2.0), CapacityMethod::reference_cantor);
}

// --- equilibrium measure -------------------------------------------------------------------

namespace {

/// Kernel matrix, stored when it fits and recomputed by column otherwise.
class Gram {
public:
    Gram(const PointSet& p, const Kernel& k) : p_(p), k_(k), n_(p.size()) {
        if (n_ * n_ <= (std::size_t{1} << 25)) {
            dense_.resize(n_ * n_);
            const long long nn = static_cast<long long>(n_);
#pragma omp parallel for schedule(static)
            for (long long i = 0; i < nn; ++i)
                for (std::size_t j = 0; j < n_; ++j)
                    dense_[static_cast<std::size_t>(i) * n_ + j] = entry(static_cast<std::size_t>(i), j);
        }
    }

    double at(std::size_t i, std::size_t j) const { return dense_.empty() ? entry(i, j) : dense_[i * n_ + j]; }

    void column(std::size_t j, std::vector<double>& out) const {
        out.resize(n_);
        for (std::size_t i = 0; i < n_; ++i) out[i] = at(i, j);
    }

    /// u = K w, one independent dot product per row.
    void apply(const std::vector<double>& w, std::vector<double>& u) const {
        u.assign(n_, 0.0);
        const long long nn = static_cast<long long>(n_);
#pragma omp parallel for schedule(static)
        for (long long i = 0; i < nn; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < n_; ++j)
                if (w[j] != 0.0) s += at(static_cast<std::size_t>(i), j) * w[j];
            u[static_cast<std::size_t>(i)] = s;
        }
    }

private:
    double entry(std::size_t i, std::size_t j) const {
        return i == j ? k_.value_at_zero() : k_.eval(std::sqrt(squared_distance(p_.point(i), p_.point(j))));
    }

    const PointSet& p_;
    const Kernel& k_;
    std::size_t n_;
    std::vector<double> dense_;
};

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    detail::CompensatedSum s;
    for (std::size_t i = 0; i < a.size(); ++i) s.add(a[i] * b[i]);
    return s.value();
}

}  // namespace

CapacityEstimate EquilibriumResult::capacity(const Kernel& k) const {
    CapacityEstimate est;
    est.method = CapacityMethod::equilibrium;
    est.kernel = k.describe();
    est.iterations = iterations;
    est.gap = gap;
    est.converged = converged;
    est.value = energy > 0.0 ? 1.0 / energy : kInf;
    return est;
}

EquilibriumResult equilibrium_measure(const PointSet& points, const Kernel& k, double tol, std::size_t max_iters) {
    const std::size_t n = points.size();
    if (n == 0) throw std::invalid_argument("equilibrium measure needs at least one point");
    if (!k.bounded())
        throw std::invalid_argument("equilibrium measure needs a bounded kernel; smooth " + k.describe() +
                                    " at the grid scale first");
    if (!(tol > 0.0)) throw std::invalid_argument("tolerance must be positive");

    const Gram K(points, k);
    EquilibriumResult res;
    res.min_rayleigh = kInf;
    std::vector<double> w(n, 1.0 / static_cast<double>(n));
    std::vector<double> u, col;
    K.apply(w, u);
    double wsq = 1.0 / static_cast<double>(n);

    constexpr std::size_t kRefresh = 1000;
    for (std::size_t it = 0;; ++it) {
        if (it > 0 && it % kRefresh == 0) K.apply(w, u);
        const double q = dot(w, u);
        std::size_t s = 0, a = n;
        for (std::size_t i = 0; i < n; ++i) {
            if (u[i] < u[s]) s = i;
            if (w[i] > 0.0 && (a == n || u[i] > u[a])) a = i;
        }
        const double fw_gap = 2.0 * (q - u[s]);
        res.gap = fw_gap;
        res.iterations = it;
        res.energy = q;
        if (fw_gap <= tol * q) {
            res.converged = true;
            break;
        }
        if (it >= max_iters) break;

        const double away_gap = 2.0 * (u[a] - q);
        const bool toward = fw_gap >= away_gap || w[a] >= 1.0;
        double slope, curv, gmax, dsq;
        std::size_t v;
        if (toward) {
            v = s;
            slope = u[s] - q;
            curv = K.at(s, s) - 2.0 * u[s] + q;
            gmax = 1.0;
            dsq = wsq - 2.0 * w[s] + 1.0;
        } else {
            v = a;
            slope = q - u[a];
            curv = q - 2.0 * u[a] + K.at(a, a);
            gmax = w[a] / (1.0 - w[a]);
            dsq = wsq - 2.0 * w[a] + 1.0;
        }
        if (dsq > 0.0) res.min_rayleigh = std::min(res.min_rayleigh, curv / dsq);
        double gamma = curv > 0.0 ? std::min(-slope / curv, gmax) : gmax;
        if (!(gamma > 0.0)) {
            res.converged = fw_gap <= tol * q;
            break;
        }

        K.column(v, col);
        if (toward) {
            for (std::size_t i = 0; i < n; ++i) {
                w[i] *= 1.0 - gamma;
                u[i] = (1.0 - gamma) * u[i] + gamma * col[i];
            }
            w[s] += gamma;
        } else {
            for (std::size_t i = 0; i < n; ++i) {
                w[i] *= 1.0 + gamma;
                u[i] = (1.0 + gamma) * u[i] - gamma * col[i];
            }
            w[a] -= gamma;
            if (gamma == gmax || w[a] < 0.0) w[a] = 0.0;
        }
        wsq = dot(w, w);
    }
    K.apply(w, u);
    res.energy = dot(w, u);
    res.weights = std::move(w);
    return res;
}

// --- sausages and hitting ------------------------------------------------------------------

SausageCapacity sausage_capacity(const DyadicHistogram& hist, const Kernel& k, double eps, int d) {
    if (!(eps >= 2.0 * hist.side(hist.n_max())))
        throw ResolutionError("eps = " + format_number(eps) + " must be >= 2 * finest cube side = " +
                              format_number(2.0 * hist.side(hist.n_max())));
    const double mass = hist.total_mass();
    if (!(mass > 0.0)) throw std::invalid_argument("sausage capacity needs a measure of positive mass");
    const Kernel fe = smooth(k, eps, d);

    SausageCapacity out;
    out.eps_level = std::max(0, static_cast<int>(std::floor(std::log2(hist.side(0) / eps))) + 1);

    const DyadicEnergy e = dyadic_energy(hist, fe);
    out.lower.method = CapacityMethod::sausage;
    out.lower.kernel = fe.describe();
    out.lower.truncation_level = hist.n_max();
    out.lower.partial_sum = e.value / (mass * mass);
    out.lower.value = e.value > 0.0 ? mass * mass / e.value : kInf;

    // Below eps_level every increment of f_eps vanishes; the constant f_eps(2 side) carries the
    // mass beyond the top cube, as in the dyadic energy.
    std::vector<std::size_t> counts;
    for (int n = 0; n <= out.eps_level; ++n) counts.push_back(box_count(hist, n));
    out.upper = capacity_upper_bound(counts, fe, 0, out.eps_level, hist.side(0));
    const double total = out.upper.partial_sum + fe.eval(2.0 * hist.side(0));
    out.upper.partial_sum = total;
    out.upper.value = total > 0.0 ? 1.0 / total : kInf;
    return out;
}

HittingBracket hitting_probability_bracket(const CapacityEstimate& cap, double k_lo, double k_hi) {
    if (!(k_lo > 0.0) || !(k_hi >= k_lo) || !std::isfinite(k_lo))
        throw std::invalid_argument("hitting bracket needs 0 < k_lo <= k_hi");
    HittingBracket b;
    b.lower = k_lo * cap.value;
    if (!std::isfinite(k_hi)) {
        b.upper = 1.0;
        b.clamped = true;
        return b;
    }
    const double hi = k_hi * cap.value;
    b.clamped = hi >= 1.0;
    b.upper = std::min(1.0, hi);
    return b;
}

}  // namespace capmc
