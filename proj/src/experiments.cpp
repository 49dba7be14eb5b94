#include "capmc/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

#include "capmc/capacity.hpp"
#include "capmc/dyadic.hpp"
#include "capmc/energy.hpp"
#include "capmc/path.hpp"
#include "capmc/rng.hpp"
#include "replicas.hpp"

namespace capmc {

PathSample replica_path(int dim, std::size_t n_steps, std::uint64_t seed, int replica) {
    return sample_brownian(dim, n_steps, 1.0, stream_seed(seed, static_cast<std::uint64_t>(replica)));
}

namespace {

[[noreturn]] void guard(const std::string& what) { throw GuardViolation(what); }

void require_positive_grid(const std::vector<double>& grid, const char* name) {
    if (grid.empty()) guard(std::string(name) + " grid must not be empty");
    for (double x : grid)
        if (!(x > 0.0) || !std::isfinite(x)) guard(std::string(name) + " values must be positive and finite");
}

double grid_min(const std::vector<double>& grid) { return *std::min_element(grid.begin(), grid.end()); }

ExperimentRecord row(const char* experiment, int replica, std::string quantity, const char* scale_kind, double scale,
                     double estimate, std::uint64_t seed) {
    ExperimentRecord r;
    r.experiment = experiment;
    r.replica = replica;
    r.quantity = std::move(quantity);
    r.scale_kind = scale_kind;
    r.scale = scale;
    r.estimate = estimate;
    r.seed = seed;
    return r;
}

struct MeanSe {
    double mean = 0.0;
    double se = 0.0;
};

MeanSe mean_se(const std::vector<double>& v) {
    MeanSe out;
    if (v.empty()) return out;
    const double n = static_cast<double>(v.size());
    out.mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
    if (v.size() > 1) {
        double ss = 0.0;
        for (double x : v) ss += (x - out.mean) * (x - out.mean);
        out.se = std::sqrt(ss / (n - 1.0) / n);
    }
    return out;
}

/// Largest power-of-two stride dividing n_steps whose time step stays <= sigma^2 / per_sigma2.
std::size_t coarsening_stride(std::size_t n_steps, double sigma, double per_sigma2) {
    const double step = 1.0 / static_cast<double>(n_steps);
    const double target = sigma * sigma / per_sigma2;
    std::size_t m = 1;
    while (n_steps % (2 * m) == 0 && static_cast<double>(2 * m) * step <= target) m *= 2;
    return m;
}

/// Normalization of S_sigma in the strong law: sigma^2 (d >= 3) or sigma^2 log(1/sigma) (d = 2).
double strong_law_norm(double sigma, int d) { return d == 2 ? sigma * sigma * std::log(1.0 / sigma) : sigma * sigma; }

double strong_law_target(int d) { return d == 2 ? 4.0 : 4.0 / (d - 2.0); }

void check_sigma_guard(const std::vector<double>& sigmas, std::size_t n_steps) {
    const double floor = 4.0 / std::sqrt(static_cast<double>(n_steps));
    if (grid_min(sigmas) < floor)
        guard("sigma_min must be >= 4*n_steps^(-1/2) = " + format_number(floor) + " (got " +
              format_number(grid_min(sigmas)) + ")");
}

/// Occupation measure of a path, mapped from [-L, L]^d onto the unit cube.
WeightedMeasure unit_box_occupation(const PathSample& path) {
    WeightedMeasure m = occupation_measure(path);
    for (double& x : m.coords) x = (x + kPathBoxHalfWidth) / (2.0 * kPathBoxHalfWidth);
    return m;
}

}  // namespace

// --- strong law ----------------------------------------------------------------------------

void validate(const StrongLawConfig& c) {
    if (c.dim < 2) guard("dim must be >= 2");
    if (c.n_steps < 1) guard("n_steps must be >= 1");
    if (c.replicas < 1) guard("replicas must be >= 1");
    if (!(c.cutoff >= 4.0)) guard("cutoff must be >= 4");
    if (!(c.points_per_sigma2 > 0.0)) guard("points_per_sigma2 must be > 0");
    require_positive_grid(c.sigmas, "sigma");
    check_sigma_guard(c.sigmas, c.n_steps);
}

std::vector<ExperimentRecord> run_strong_law(const StrongLawConfig& c) {
    validate(c);
    const char* tag = "strong-law";
    std::vector<double> reference;
    for (double s : c.sigmas) reference.push_back(expected_S_quadrature(s, c.dim));

    auto rows = detail::over_replicas(c.replicas, [&](int r) {
        std::vector<ExperimentRecord> out;
        const PathSample path = replica_path(c.dim, c.n_steps, c.seed, r);
        for (std::size_t i = 0; i < c.sigmas.size(); ++i) {
            const double s = c.sigmas[i];
            const std::size_t stride = coarsening_stride(c.n_steps, s, c.points_per_sigma2);
            const WeightedMeasure mu = occupation_measure(path, stride);
            const FastGaussianEnergy e = gaussian_energy_fast(mu, s, c.cutoff);
            const double norm = strong_law_norm(s, c.dim);
            auto rec = row(tag, r, "S_ratio", "sigma", s, e.value / norm, c.seed);
            rec.reference = reference[i] / norm;
            rec.diag("S", e.value)
                .diag("error_bound", e.error_bound)
                .diag("stride", static_cast<double>(stride))
                .diag("atoms", static_cast<double>(mu.size()))
                .diag("pairs", static_cast<double>(e.pairs))
                .diag("target", strong_law_target(c.dim));
            out.push_back(std::move(rec));
        }
        return out;
    });

    for (std::size_t i = 0; i < c.sigmas.size(); ++i) {
        const double s = c.sigmas[i];
        std::vector<double> ratios, values;
        for (const auto& r : rows)
            if (r.quantity == "S_ratio" && r.scale == s) {
                ratios.push_back(r.estimate);
                values.push_back(*r.find_diag("S"));
            }
        const double norm = strong_law_norm(s, c.dim);
        const MeanSe mr = mean_se(ratios), mv = mean_se(values);
        auto a = row(tag, -1, "S_ratio_mean", "sigma", s, mr.mean, c.seed);
        a.reference = reference[i] / norm;
        a.diag("stderr", mr.se).diag("replicas", static_cast<double>(ratios.size()))
            .diag("target", strong_law_target(c.dim));
        rows.push_back(std::move(a));
        auto b = row(tag, -1, "S_mean", "sigma", s, mv.mean, c.seed);
        b.reference = reference[i];
        b.diag("stderr", mv.se).diag("replicas", static_cast<double>(values.size()));
        rows.push_back(std::move(b));
    }
    return rows;
}

// --- moments -------------------------------------------------------------------------------

void validate(const MomentsConfig& c) {
    if (c.dim < 2) guard("dim must be >= 2");
    if (c.replicas < 0) guard("replicas must be >= 0");
    require_positive_grid(c.sigmas, "sigma");
    if (c.replicas > 0) {
        if (c.n_steps < 1) guard("n_steps must be >= 1");
        if (!(c.cutoff >= 4.0)) guard("cutoff must be >= 4");
        if (!(c.points_per_sigma2 > 0.0)) guard("points_per_sigma2 must be > 0");
        check_sigma_guard(c.sigmas, c.n_steps);
    }
}

std::vector<ExperimentRecord> run_moments(const MomentsConfig& c) {
    validate(c);
    const char* tag = "moments";
    std::vector<ExperimentRecord> rows;
    std::vector<double> expected;
    std::vector<double> remainders;
    const double lead = c.dim >= 3 ? 4.0 / (c.dim - 2.0) : 0.0;
    for (double s : c.sigmas) {
        const double es = expected_S_quadrature(s, c.dim);
        expected.push_back(es);
        auto r = row(tag, -1, "expected_S", "sigma", s, es, c.seed);
        if (c.dim == 3) r.reference = expected_S_closed_form_d3(s);
        rows.push_back(std::move(r));
        if (c.dim >= 3) {
            const double rem = std::abs(es - lead * s * s);
            remainders.push_back(rem);
            rows.push_back(row(tag, -1, "remainder", "sigma", s, rem, c.seed));
            const double i1 = second_moment_I1_quadrature(s, c.dim);
            auto q = row(tag, -1, "I1_ratio", "sigma", s, 8.0 * i1 / std::pow(lead * s * s, 2), c.seed);
            q.reference = 1.0;
            q.diag("I1", i1);
            rows.push_back(std::move(q));
        }
    }
    if (remainders.size() >= 2 && std::all_of(remainders.begin(), remainders.end(), [](double x) { return x > 0.0; })) {
        auto r = row(tag, -1, "remainder_slope", "sigma", grid_min(c.sigmas), log_log_slope(c.sigmas, remainders),
                     c.seed);
        if (c.dim == 3) r.reference = 3.0;
        rows.push_back(std::move(r));
    }
    if (c.replicas == 0) return rows;

    auto mc = detail::over_replicas(c.replicas, [&](int r) {
        std::vector<ExperimentRecord> out;
        const PathSample path = replica_path(c.dim, c.n_steps, c.seed, r);
        for (std::size_t i = 0; i < c.sigmas.size(); ++i) {
            const double s = c.sigmas[i];
            const std::size_t stride = coarsening_stride(c.n_steps, s, c.points_per_sigma2);
            const FastGaussianEnergy e = gaussian_energy_fast(occupation_measure(path, stride), s, c.cutoff);
            auto rec = row(tag, r, "S", "sigma", s, e.value, c.seed);
            rec.reference = expected[i];
            rec.diag("error_bound", e.error_bound).diag("stride", static_cast<double>(stride));
            out.push_back(std::move(rec));
        }
        return out;
    });
    for (std::size_t i = 0; i < c.sigmas.size(); ++i) {
        std::vector<double> v;
        for (const auto& r : mc)
            if (r.scale == c.sigmas[i]) v.push_back(r.estimate);
        const MeanSe m = mean_se(v);
        auto a = row(tag, -1, "S_mean", "sigma", c.sigmas[i], m.mean, c.seed);
        a.reference = expected[i];
        a.diag("stderr", m.se)
            .diag("z", m.se > 0.0 ? (m.mean - expected[i]) / m.se : 0.0)
            .diag("replicas", static_cast<double>(v.size()));
        mc.push_back(std::move(a));
    }
    rows.insert(rows.end(), mc.begin(), mc.end());
    return rows;
}

// --- Wiener sausage box counts -------------------------------------------------------------

void validate(const SausageConfig& c) {
    if (c.dim < 2) guard("dim must be >= 2");
    if (c.n_steps < 1) guard("n_steps must be >= 1");
    if (c.replicas < 1) guard("replicas must be >= 1");
    if (c.n_min < 0 || c.n_min > c.n_max) guard("n range must satisfy 0 <= n_min <= n_max");
    if (std::ldexp(1.0, c.n_max) > std::sqrt(static_cast<double>(c.n_steps)))
        guard("2^n_max must be <= n_steps^(1/2) = " + format_number(std::sqrt(static_cast<double>(c.n_steps))));
    if (c.n_max * c.dim > 62) guard("n_max * dim must be <= 62");
}

std::vector<ExperimentRecord> run_sausage_counts(const SausageConfig& c) {
    validate(c);
    const char* tag = "sausage";
    return detail::over_replicas(c.replicas, [&](int r) {
        std::vector<ExperimentRecord> out;
        const PathSample path = replica_path(c.dim, c.n_steps, c.seed, r);
        DyadicHistogram h;
        try {
            h = bin_measure(unit_box_occupation(path), c.n_max);
        } catch (const BoxEscape& e) {
            out.push_back(detail::aborted_row(tag, r, c.seed, e));
            return out;
        }
        double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
        for (int n = c.n_min; n <= c.n_max; ++n) {
            const std::size_t count = box_count(h, n);
            double scaled = static_cast<double>(count) * std::ldexp(1.0, -2 * n);
            if (c.dim == 2) scaled *= n;
            lo = std::min(lo, scaled);
            hi = std::max(hi, scaled);
            auto rec = row(tag, r, c.dim == 2 ? "nN_scaled" : "N_scaled", "n", n, scaled, c.seed);
            rec.diag("N", static_cast<double>(count));
            out.push_back(std::move(rec));
        }
        auto band = row(tag, r, "band_ratio", "n", c.n_max, hi / lo, c.seed);
        band.diag("n_min", c.n_min);
        out.push_back(std::move(band));
        return out;
    });
}

// --- capacity equivalence ------------------------------------------------------------------

namespace {

constexpr int kReferenceLevels = 400;

/// Geometric-mean ratio of the last four dyadic terms (f(s_n) - f(2 s_n)) sum_Q nu(Q)^2; >= 1 means
/// the energy keeps growing with resolution.
double tail_growth(const DyadicHistogram& h, const Kernel& f) {
    const int top = h.n_max();
    const int base = std::max(0, top - 4);
    auto term = [&](int n) { return dyadic_increment(f, n, h.side(0)) * sum_squares(h, n); };
    const double a = term(base), b = term(top);
    if (!(a > 0.0) || top == base) return 0.0;
    return std::pow(b / a, 1.0 / (top - base));
}

}  // namespace

void validate(const CapEquivConfig& c) {
    if (c.dim < 2) guard("dim must be >= 2");
    if (c.n_steps < 1) guard("n_steps must be >= 1");
    if (c.replicas < 1) guard("replicas must be >= 1");
    if (c.n_max < 4) guard("n_max must be >= 4");
    if (c.n_max * c.dim > 62) guard("n_max * dim must be <= 62");
    require_positive_grid(c.alphas, "alpha");
    for (double a : c.alphas)
        if (std::abs(a - 2.0) < 0.1 - 1e-12) guard("alpha grid must avoid the critical value 2 by >= 0.1 (got " + format_number(a) + ")");
    for (double a : c.alphas)
        if (!(a < c.dim)) guard("alpha must be < dim");
}

std::vector<ExperimentRecord> run_capacity_equivalence(const CapEquivConfig& c) {
    validate(c);
    const char* tag = "cap-equiv";
    const bool use_log = c.dim == 2 && c.log_adjust;
    std::vector<CapacityEstimate> reference;
    for (double a : c.alphas) {
        const Kernel f = riesz_kernel(a);
        reference.push_back(reference_square_capacity(use_log ? log_adjusted(f) : f, kReferenceLevels));
    }

    return detail::over_replicas(c.replicas, [&](int r) {
        std::vector<ExperimentRecord> out;
        const PathSample path = replica_path(c.dim, c.n_steps, c.seed, r);
        DyadicHistogram h;
        try {
            h = bin_measure(unit_box_occupation(path), c.n_max);
        } catch (const BoxEscape& e) {
            out.push_back(detail::aborted_row(tag, r, c.seed, e));
            return out;
        }
        const double eps = 2.0 * h.side(c.n_max);
        double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
        for (std::size_t i = 0; i < c.alphas.size(); ++i) {
            const double a = c.alphas[i];
            const Kernel f = riesz_kernel(a);
            const DyadicEnergy e = dyadic_energy(h, smooth(f, eps, c.dim));
            const double cap = h.total_mass() * h.total_mass() / e.value;
            const bool occ_divergent = tail_growth(h, f) >= 1.0;
            const bool ref_divergent = reference[i].divergent;
            const double ratio = ref_divergent ? std::numeric_limits<double>::quiet_NaN() : cap / reference[i].value;
            auto rec = row(tag, r, "R", "alpha", a, ratio, c.seed);
            rec.diag("cap_occupation", cap)
                .diag("cap_reference", reference[i].value)
                .diag("energy", e.value)
                .diag("divergent_occupation", occ_divergent ? 1.0 : 0.0)
                .diag("divergent_reference", ref_divergent ? 1.0 : 0.0)
                .diag("log_adjusted", use_log ? 1.0 : 0.0);
            out.push_back(std::move(rec));
            if (!ref_divergent && !occ_divergent) {
                lo = std::min(lo, ratio);
                hi = std::max(hi, ratio);
            }
        }
        auto spread = row(tag, r, "R_spread", "alpha", c.alphas.back(), hi > 0.0 ? hi / lo : 0.0, c.seed);
        spread.diag("log_adjusted", use_log ? 1.0 : 0.0);
        out.push_back(std::move(spread));
        return out;
    });
}

// --- zero set ------------------------------------------------------------------------------

namespace {

/// Levels of the local-time energy: the finest dyadic time scale still >= 10 steps.
int energy_levels(std::size_t n_steps) {
    return std::min(20, static_cast<int>(std::floor(std::log2(static_cast<double>(n_steps) / 10.0))));
}

std::size_t zero_box_count(const ZeroSetSample& zs, int n) {
    const double cells = std::ldexp(1.0, n);
    const auto top = static_cast<std::int64_t>(cells) - 1;
    std::size_t count = 0;
    std::int64_t last = -1;
    for (double t : zs.zero_times) {
        const auto j = std::min(static_cast<std::int64_t>(t / zs.horizon * cells), top);
        if (j != last) ++count;
        last = j;
    }
    return count;
}

}  // namespace

void validate(const ZeroSetConfig& c) {
    if (c.n_steps < 1) guard("n_steps must be >= 1");
    if (c.replicas < 1) guard("replicas must be >= 1");
    require_positive_grid(c.deltas, "delta");
    const double floor = 10.0 / static_cast<double>(c.n_steps);
    if (grid_min(c.deltas) < floor) guard("delta_min must be >= 10/n_steps = " + format_number(floor));
    if (c.n_min < 0 || c.n_min > c.n_max) guard("n range must satisfy 0 <= n_min <= n_max");
    if (std::ldexp(1.0, -c.n_max) < floor) guard("2^-n_max must be >= 10/n_steps = " + format_number(floor));
    for (double a : c.energy_alphas) {
        if (!(a > 0.0 && a < 1.0)) guard("energy alphas must lie in (0, 1)");
        if (std::abs(a - 0.5) < 0.1 - 1e-12) guard("energy alphas must avoid the critical value 1/2 by >= 0.1");
    }
}

std::vector<ExperimentRecord> zero_set_records(const PathSample& path, const ZeroSetConfig& c, int replica) {
    if (path.dim != 1) throw std::invalid_argument("zero set analysis needs a one-dimensional path");
    const char* tag = "zero-set";
    std::vector<ExperimentRecord> out;
    const ZeroSetSample zs = zero_set(path);
    const LocalTimeProfile lt = local_time_profile(path);
    const double ell = lt.final_value();
    const bool empty = !(ell > 0.0);
    const double nan = std::numeric_limits<double>::quiet_NaN();
    auto flag = [&](ExperimentRecord& r) {
        if (empty) r.diag("empty_zero_set", 1.0);
    };

    for (double delta : c.deltas) {
        const std::size_t count = excursion_count(zs, delta);
        const double levy = std::sqrt(delta) * static_cast<double>(count) / (std::sqrt(2.0 / std::numbers::pi) * ell);
        auto rec = row(tag, replica, "levy_ratio", "delta", delta, empty ? nan : levy, c.seed);
        rec.reference = 1.0;
        rec.diag("N_delta", static_cast<double>(count)).diag("local_time", ell);
        flag(rec);
        out.push_back(std::move(rec));
    }

    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (int n = c.n_min; n <= c.n_max; ++n) {
        const std::size_t count = zero_box_count(zs, n);
        const double ratio = static_cast<double>(count) * std::pow(2.0, -0.5 * n) / ell;
        auto rec = row(tag, replica, "NZ_ratio", "n", n, empty ? nan : ratio, c.seed);
        rec.diag("N_n", static_cast<double>(count));
        flag(rec);
        out.push_back(std::move(rec));
        if (!empty) {
            lo = std::min(lo, ratio);
            hi = std::max(hi, ratio);
        }
    }
    auto band = row(tag, replica, "NZ_band", "n", c.n_max, empty ? nan : hi / lo, c.seed);
    band.diag("n_min", c.n_min);
    flag(band);
    out.push_back(std::move(band));

    for (double delta : c.deltas) {
        const double L = quadratic_variation(lt, delta);
        auto rec = row(tag, replica, "L_scaled", "delta", delta, L / std::sqrt(delta), c.seed);
        rec.diag("L", L);
        flag(rec);
        out.push_back(std::move(rec));
    }

    // Energy of the normalized local-time measure against the Cantor-set reference.
    const WeightedMeasure ell_measure = local_time_measure(path, lt.bandwidth);
    const int levels = energy_levels(path.n_steps);
    // Atoms may sit at t = horizon; the box is one step wider than [0, horizon].
    const BoxMap time_box{{0.0}, path.horizon + path.step()};
    std::optional<DyadicHistogram> h;
    if (ell_measure.size() > 0) h = bin_measure(ell_measure.normalized(), levels, time_box);
    for (double a : c.energy_alphas) {
        const Kernel f = riesz_kernel(a);
        const CapacityEstimate ref = reference_cantor_capacity(f, levels);
        auto rec = row(tag, replica, "energy_ratio", "alpha", a, nan, c.seed);
        rec.diag("cap_reference", ref.value).diag("levels", levels);
        if (h) {
            const double eps = 2.0 * h->side(levels);
            const double cap = 1.0 / dyadic_energy(*h, smooth(f, eps, 1)).value;
            rec.estimate = cap / ref.value;
            rec.diag("cap_local_time", cap);
        } else {
            rec.diag("empty_zero_set", 1.0);
        }
        out.push_back(std::move(rec));
    }
    return out;
}

std::vector<ExperimentRecord> run_zero_set(const ZeroSetConfig& c) {
    validate(c);
    auto rows = detail::over_replicas(c.replicas, [&](int r) {
        return zero_set_records(replica_path(1, c.n_steps, c.seed, r), c, r);
    });
    std::vector<double> mean_L;
    for (double delta : c.deltas) {
        std::vector<double> v;
        for (const auto& r : rows)
            if (r.quantity == "L_scaled" && r.scale == delta) v.push_back(*r.find_diag("L"));
        const MeanSe m = mean_se(v);
        mean_L.push_back(m.mean);
        auto a = row("zero-set", -1, "L_mean", "delta", delta, m.mean, c.seed);
        a.diag("stderr", m.se);
        rows.push_back(std::move(a));
    }
    if (c.deltas.size() >= 2 && std::all_of(mean_L.begin(), mean_L.end(), [](double x) { return x > 0.0; })) {
        auto s = row("zero-set", -1, "L_slope", "delta", grid_min(c.deltas), log_log_slope(c.deltas, mean_L), c.seed);
        s.reference = 0.5;
        rows.push_back(std::move(s));
    }
    return rows;
}

}  // namespace capmc
