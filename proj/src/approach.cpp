#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <boost/random/beta_distribution.hpp>
#include <boost/random/normal_distribution.hpp>

#include "capmc/capacity.hpp"
#include "capmc/dyadic.hpp"
#include "capmc/experiments.hpp"
#include "capmc/path.hpp"
#include "capmc/rng.hpp"
#include "replicas.hpp"

namespace capmc {

namespace {

[[noreturn]] void guard(const std::string& what) { throw GuardViolation(what); }

constexpr std::size_t kWalkBlock = 1000;

/// Largest spatial scale the discretized path does not resolve.
double path_resolution(const ApproachConfig& c) {
    const double step = 1.0 / std::sqrt(static_cast<double>(c.n_steps));
    const double cube = 2.0 * kPathBoxHalfWidth * std::ldexp(1.0, -c.n_max);
    return std::max(step, cube);
}

enum class WalkEnd { hit, escape, censored };

struct Geometry {
    const PointIndex* index;
    std::vector<double> center;
    double escape_radius;
};

/// One walk on spheres from x. For alpha < 2 the process leaves the ball B(y, r) by a jump whose
/// radius is r V^{-1/2} with V ~ Beta(alpha/2, 1 - alpha/2) and whose direction is uniform; for
/// alpha = 2 it exits on the sphere and the walk stops within a thin shell around the sausage.
template <class Eng>
WalkEnd walk(const Geometry& g, std::span<const double> x, double alpha, double eps, std::size_t max_steps, Eng& eng) {
    const std::size_t d = x.size();
    std::vector<double> y(x.begin(), x.end()), dir(d);
    boost::random::normal_distribution<double> normal;
    const bool brownian = alpha == 2.0;
    boost::random::beta_distribution<double> beta(brownian ? 1.0 : alpha / 2.0, brownian ? 1.0 : 1.0 - alpha / 2.0);
    const double shell = brownian ? 1e-3 * eps : 0.0;
    const double escape2 = g.escape_radius * g.escape_radius;

    for (std::size_t step = 0; step < max_steps; ++step) {
        const double D = *g.index->nearest_distance(y);
        if (D < eps + shell) return WalkEnd::hit;
        if (squared_distance(y, g.center) > escape2) return WalkEnd::escape;
        double norm2 = 0.0;
        for (auto& v : dir) {
            v = normal(eng);
            norm2 += v * v;
        }
        const double r = D - eps;
        const double jump = brownian ? r : r / std::sqrt(beta(eng));
        const double scale = jump / std::sqrt(norm2);
        for (std::size_t k = 0; k < d; ++k) y[k] += scale * dir[k];
    }
    return WalkEnd::censored;
}

struct WalkCounts {
    std::size_t hits = 0, escapes = 0, censored = 0;
};

WalkCounts run_walks(const Geometry& g, std::span<const double> x, const ApproachConfig& c, double eps,
                     std::uint64_t stream) {
    const std::size_t nblocks = (c.mc_paths + kWalkBlock - 1) / kWalkBlock;
    std::vector<WalkCounts> per(nblocks);
    const long long nb = static_cast<long long>(nblocks);
#pragma omp parallel for schedule(dynamic, 1)
    for (long long b = 0; b < nb; ++b) {
        Engine eng = make_engine(stream_seed(stream, static_cast<std::uint64_t>(b)));
        const std::size_t w0 = static_cast<std::size_t>(b) * kWalkBlock;
        const std::size_t w1 = std::min(w0 + kWalkBlock, c.mc_paths);
        WalkCounts& out = per[static_cast<std::size_t>(b)];
        for (std::size_t w = w0; w < w1; ++w) {
            switch (walk(g, x, c.alpha, eps, c.max_steps, eng)) {
                case WalkEnd::hit: ++out.hits; break;
                case WalkEnd::escape: ++out.escapes; break;
                case WalkEnd::censored: ++out.censored; break;
            }
        }
    }
    WalkCounts total;
    for (const auto& p : per) {
        total.hits += p.hits;
        total.escapes += p.escapes;
        total.censored += p.censored;
    }
    return total;
}

}  // namespace

void validate(const ApproachConfig& c) {
    if (c.dim < 3) guard("dim must be >= 3");
    if (!(c.alpha > 0.0 && c.alpha <= 2.0)) guard("alpha must lie in (0, 2]");
    if (c.alpha > c.dim - 2.0) guard("alpha must be <= dim - 2");
    if (c.n_steps < 1) guard("n_steps must be >= 1");
    if (c.mc_paths < 1) guard("mc_paths must be >= 1");
    if (c.max_steps < 1) guard("max_steps must be >= 1");
    if (c.n_max < 1 || c.n_max * c.dim > 62) guard("n_max must satisfy 1 <= n_max and n_max * dim <= 62");
    if (!(c.escape_factor > 1.0)) guard("escape_factor must be > 1");
    if (!(c.bracket_widening >= 1.0)) guard("bracket_widening must be >= 1");
    if (!c.x_start.empty() && c.x_start.size() != static_cast<std::size_t>(c.dim))
        guard("x_start must have dim coordinates");
    if (c.eps.empty()) guard("eps grid must not be empty");
    for (double e : c.eps)
        if (!(e > 0.0) || !std::isfinite(e)) guard("eps values must be positive and finite");
    const double floor = 4.0 * path_resolution(c);
    if (*std::min_element(c.eps.begin(), c.eps.end()) < floor)
        guard("eps_min must be >= 4*resolution = " + format_number(floor) +
              " (resolution = max(n_steps^(-1/2), 2L*2^-n_max))");
}

std::vector<ExperimentRecord> run_approach(const ApproachConfig& c) {
    validate(c);
    const char* tag = "approach";
    std::vector<ExperimentRecord> rows;
    auto row = [&](std::string quantity, const char* kind, double scale, double estimate) {
        ExperimentRecord r;
        r.experiment = tag;
        r.replica = 0;
        r.quantity = std::move(quantity);
        r.scale_kind = kind;
        r.scale = scale;
        r.estimate = estimate;
        r.seed = c.seed;
        return r;
    };

    const PathSample path = replica_path(c.dim, c.n_steps, c.seed, 0);
    DyadicHistogram hist;
    try {
        hist = bin_measure(occupation_measure(path), c.n_max, BoxMap::centered(c.dim, kPathBoxHalfWidth));
    } catch (const BoxEscape& e) {
        rows.push_back(detail::aborted_row(tag, 0, c.seed, e));
        return rows;
    }
    const PointIndex index(PointSet{path.dim, path.positions});

    const std::size_t d = static_cast<std::size_t>(c.dim);
    std::vector<double> lo(d, std::numeric_limits<double>::infinity()), hi(d, -lo[0]);
    for (std::size_t i = 0; i <= path.n_steps; ++i)
        for (std::size_t k = 0; k < d; ++k) {
            lo[k] = std::min(lo[k], path.point(i)[k]);
            hi[k] = std::max(hi[k], path.point(i)[k]);
        }
    Geometry geo{&index, std::vector<double>(d), 0.0};
    for (std::size_t k = 0; k < d; ++k) geo.center[k] = 0.5 * (lo[k] + hi[k]);
    const double diameter = 2.0 * index.farthest_distance(geo.center);
    geo.escape_radius = c.escape_factor * diameter;

    std::vector<double> x = c.x_start;
    if (x.empty()) {
        x.assign(d, 0.0);
        x[0] = hi[0] + 0.5;
    }
    const double m = *index.nearest_distance(x);
    const double M = index.farthest_distance(x);
    const double eps_max = *std::max_element(c.eps.begin(), c.eps.end());
    if (m < 0.1 || m <= eps_max)
        guard("x_start must be at distance >= max(0.1, eps_max) from the path (distance " + format_number(m) + ")");

    const Kernel f = stable_potential_kernel(c.alpha, c.dim);
    const bool log_regime = c.alpha == c.dim - 2.0;
    std::vector<double> eps_fit, p_fit;
    std::size_t inside = 0;

    for (std::size_t i = 0; i < c.eps.size(); ++i) {
        const double eps = c.eps[i];
        const WalkCounts wc = run_walks(geo, x, c, eps, stream_seed(c.seed, 1 + i));
        const double n = static_cast<double>(c.mc_paths);
        const double p = static_cast<double>(wc.hits) / n;

        const SausageCapacity cap = sausage_capacity(hist, f, eps, c.dim);
        CapacityEstimate widened_lo = cap.lower, widened_hi = cap.upper;
        widened_lo.value /= c.bracket_widening;
        widened_hi.value *= c.bracket_widening;
        const double k_lo = f.eval(M + eps), k_hi = f.eval(m - eps);
        const HittingBracket b_lo = hitting_probability_bracket(widened_lo, k_lo, k_hi);
        const HittingBracket b_hi = hitting_probability_bracket(widened_hi, k_lo, k_hi);
        const bool in = b_lo.lower <= p && p <= b_hi.upper;
        inside += in ? 1 : 0;

        auto rec = row("hit_probability", "eps", eps, p);
        rec.diag("hits", static_cast<double>(wc.hits))
            .diag("paths", n)
            .diag("stderr", std::sqrt(p * (1.0 - p) / n))
            .diag("censored_fraction", static_cast<double>(wc.censored) / n)
            .diag("escaped_fraction", static_cast<double>(wc.escapes) / n)
            .diag("bracket_lower", b_lo.lower)
            .diag("bracket_upper", b_hi.upper)
            .diag("inside", in ? 1.0 : 0.0)
            .diag("cap_lower", cap.lower.value)
            .diag("cap_upper", cap.upper.value)
            .diag("m", m)
            .diag("M", M)
            .diag("escape_radius", geo.escape_radius)
            .diag("max_steps", static_cast<double>(c.max_steps));
        rows.push_back(std::move(rec));
        if (log_regime) rows.push_back(row("log_normalized", "eps", eps, p * std::log(1.0 / eps)));
        if (p > 0.0) {
            eps_fit.push_back(eps);
            p_fit.push_back(p);
        }
    }

    if (eps_fit.size() >= 2) {
        auto r = row("exponent", "eps", *std::min_element(c.eps.begin(), c.eps.end()), log_log_slope(eps_fit, p_fit));
        if (!log_regime) r.reference = c.dim - c.alpha - 2.0;
        r.diag("points", static_cast<double>(eps_fit.size()));
        rows.push_back(std::move(r));
    }
    auto cov = row("bracket_coverage", "eps", *std::min_element(c.eps.begin(), c.eps.end()),
                   static_cast<double>(inside) / static_cast<double>(c.eps.size()));
    cov.diag("bracket_widening", c.bracket_widening);
    rows.push_back(std::move(cov));
    return rows;
}

}  // namespace capmc
