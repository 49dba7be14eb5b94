// Acceptance gate: one PASS/FAIL line per criterion.
//
//   acceptance [--only 1,5,9] [--expect-fail 10]
//
// Exit status is 0 when the failing criteria are exactly the --expect-fail set, so a known
// red criterion stays visible in the output without masking a new failure (or an unexpected pass).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "capmc/capacity.hpp"
#include "capmc/energy.hpp"
#include "capmc/experiments.hpp"
#include "capmc/parallel.hpp"

using namespace capmc;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

std::vector<const ExperimentRecord*> select(const std::vector<ExperimentRecord>& rows, const std::string& quantity) {
    std::vector<const ExperimentRecord*> out;
    for (const auto& r : rows)
        if (r.quantity == quantity) out.push_back(&r);
    return out;
}

std::string csv(const std::vector<ExperimentRecord>& rows) {
    std::ostringstream os;
    write_csv(rows, os);
    return os.str();
}

// Full-scale configurations shared by the statistical criteria and the reproducibility check.

StrongLawConfig strong_law_config() {
    StrongLawConfig c;
    c.dim = 3;
    c.n_steps = std::size_t{1} << 22;
    for (int k = 2; k <= 8; ++k) c.sigmas.push_back(std::ldexp(1.0, -k));
    c.replicas = 8;
    c.seed = 42;
    return c;
}

MomentsConfig moments_config() {
    MomentsConfig c;
    c.dim = 3;
    c.sigmas = {0.125, 0.03125};
    c.replicas = 200;
    c.n_steps = std::size_t{1} << 18;
    c.seed = 42;
    return c;
}

SausageConfig sausage_config() {
    SausageConfig c;
    c.dim = 3;
    c.n_steps = std::size_t{1} << 22;
    c.n_min = 3;
    c.n_max = 9;
    c.replicas = 5;
    c.seed = 42;
    return c;
}

ZeroSetConfig zero_set_config() {
    ZeroSetConfig c;
    c.n_steps = std::size_t{1} << 22;
    for (int k = 4; k <= 10; ++k) c.deltas.push_back(std::ldexp(1.0, -k));
    c.n_min = 4;
    c.n_max = 9;
    c.replicas = 50;
    c.seed = 42;
    return c;
}

CapEquivConfig cap_equiv_config(int dim) {
    CapEquivConfig c;
    c.dim = dim;
    for (int i = 1; i <= 7; ++i) c.alphas.push_back(0.25 * i);
    c.n_steps = std::size_t{1} << 20;
    c.n_max = 12;
    c.replicas = 5;
    c.seed = 42;
    c.log_adjust = false;  // only matters in d = 2, where the plain kernel is the negative control
    return c;
}

ApproachConfig approach_config() {
    ApproachConfig c;
    c.dim = 4;
    c.alpha = 1.0;
    c.eps = {0.25, 0.125, 0.0625, 0.03125};
    c.mc_paths = 100000;
    c.seed = 42;
    return c;
}

/// Tables from the first (single-worker) run of each experiment, kept for criterion 12.
std::map<std::string, std::string>& first_runs() {
    static std::map<std::string, std::string> tables;
    return tables;
}

std::vector<ExperimentRecord> remember(const std::string& name, std::vector<ExperimentRecord> rows) {
    first_runs()[name] = csv(rows);
    return rows;
}

// --- criteria ------------------------------------------------------------------------------

Outcome strong_law() {
    const auto c = strong_law_config();
    const auto rows = remember("strong-law", run_strong_law(c));
    const double target = 4.0;
    int in_band = 0, closer = 0;
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (int r = 0; r < c.replicas; ++r) {
        double first = NAN, last = NAN;
        for (const auto* row : select(rows, "S_ratio")) {
            if (row->replica != r) continue;
            if (row->scale == c.sigmas.front()) first = row->estimate;
            if (row->scale == c.sigmas.back()) last = row->estimate;
        }
        if (last >= 3.0 && last <= 5.0) ++in_band;
        if (std::abs(last - target) < std::abs(first - target)) ++closer;
        lo = std::min(lo, last);
        hi = std::max(hi, last);
    }
    return {in_band >= 7 && closer == c.replicas,
            fmt("S/sigma^2 at sigma=2^-8 in [3,5] for %d/8 (range %.3f..%.3f), closer to 4 than at 2^-2 for %d/8",
                in_band, lo, hi, closer)};
}

Outcome first_moment() {
    const auto c = moments_config();
    const auto rows = remember("moments", run_moments(c));
    bool pass = true;
    std::string detail;
    for (const auto* r : select(rows, "S_mean")) {
        const double z = *r->find_diag("z");
        pass = pass && std::abs(z) <= 3.0;
        detail += fmt("sigma=%g: mean %.6g vs %.6g (z=%.2f); ", r->scale, r->estimate, *r->reference, z);
    }
    double worst = 0.0;
    for (double s : {1e-3, 0.01, 0.03125, 0.125, 0.5, 1.0, 4.0}) {
        const double q = expected_S_quadrature(s, 3), e = expected_S_closed_form_d3(s);
        worst = std::max(worst, std::abs(q - e) / std::abs(e));
    }
    pass = pass && worst <= 1e-9;
    return {pass, detail + fmt("quadrature vs closed form max rel %.2e", worst)};
}

Outcome remainder_orders() {
    const auto t0 = std::chrono::steady_clock::now();
    MomentsConfig c;
    c.dim = 3;
    c.sigmas = {0.1, 0.05, 0.025};
    const auto rows = run_moments(c);
    const double slope = select(rows, "remainder_slope").at(0)->estimate;
    const double s = 1e-3;
    const double ratio = 8.0 * second_moment_I1_quadrature(s, 3) / std::pow(4.0 * s * s, 2);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return {slope >= 2.7 && ratio >= 0.98 && ratio <= 1.02 && secs < 1.0,
            fmt("remainder slope %.4f (>= 2.7), 8 I1/(4 sigma^2)^2 at 1e-3 = %.5f, %.3f s", slope, ratio, secs)};
}

Outcome monotonicity() {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int violations = 0, measures = 0;
    for (int dim : {2, 3, 5}) {
        const int count = dim == 5 ? 34 : 33;
        for (int t = 0; t < count; ++t, ++measures) {
            const std::size_t n = 20 + rng() % 300;
            std::vector<double> coords(n * static_cast<std::size_t>(dim)), w(n);
            for (auto& x : coords) x = u(rng);
            for (auto& x : w) x = u(rng);
            const WeightedMeasure m(dim, coords, w);
            // Ten decreasing scales from a random start, random ratios in (1, 2.5].
            std::vector<double> sigmas{0.5 + u(rng)};
            while (sigmas.size() < 10) sigmas.push_back(sigmas.back() / (1.0 + 1.5 * u(rng) + 1e-3));
            const auto prof = scaled_S_profile(m, sigmas, dim);
            for (std::size_t i = 1; i < prof.size(); ++i)
                if (prof[i].scaled < prof[i - 1].scaled * (1.0 - 1e-10)) ++violations;
        }
    }
    return {violations == 0, fmt("%d monotonicity violations over %d measures x 10 scales", violations, measures)};
}

Outcome dyadic_comparability() {
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    bool pass = true;
    std::string detail;
    double worst_lo = std::numeric_limits<double>::infinity(), worst_hi = 0.0, worst_spread = 0.0;
    for (int dim : {1, 2, 3}) {
        const int n_max = dim == 1 ? 12 : (dim == 2 ? 9 : 7);
        const double eps = 2.0 * std::ldexp(1.0, -n_max);
        const std::vector<Kernel> kernels{
            smooth(riesz_kernel(0.3 * dim), eps, dim), smooth(riesz_kernel(0.6 * dim), eps, dim),
            smooth(riesz_kernel(0.9 * dim), eps, dim), smooth(log_adjusted(riesz_kernel(0.5 * dim)), eps, dim),
            gaussian_kernel(0.05)};
        std::vector<double> lo(kernels.size(), std::numeric_limits<double>::infinity()), hi(kernels.size(), 0.0);
        for (int t = 0; t < 50; ++t) {
            // Atoms i.i.d. uniform in the unit cube with i.i.d. uniform weights.
            const std::size_t n = 200 + rng() % 2801;
            std::vector<double> coords(n * static_cast<std::size_t>(dim)), w(n);
            for (auto& x : coords) x = u(rng);
            for (auto& x : w) x = u(rng);
            const WeightedMeasure m(dim, coords, w);
            const DyadicHistogram h = bin_measure(m, n_max);
            for (std::size_t k = 0; k < kernels.size(); ++k) {
                const double ratio = dyadic_energy(h, kernels[k]).value / direct_energy(m, kernels[k]);
                lo[k] = std::min(lo[k], ratio);
                hi[k] = std::max(hi[k], ratio);
            }
        }
        for (std::size_t k = 0; k < kernels.size(); ++k) {
            if (std::getenv("CAPMC_ACCEPTANCE_VERBOSE"))
                std::printf("  d=%d %s: ratio %.4f..%.4f spread %.3f\n", dim, kernels[k].describe().c_str(), lo[k], hi[k],
                            hi[k] / lo[k]);
            pass = pass && lo[k] >= 1.0 / 64 && hi[k] <= 64.0 && hi[k] / lo[k] <= 8.0;
            worst_lo = std::min(worst_lo, lo[k]);
            worst_hi = std::max(worst_hi, hi[k]);
            worst_spread = std::max(worst_spread, hi[k] / lo[k]);
        }
    }
    return {pass, fmt("ratios in [%.3f, %.3f] (band [1/64, 64]), worst spread across measures %.3f (<= 8)", worst_lo,
                      worst_hi, worst_spread)};
}

PointSet grid_points(int side) {
    PointSet p{2, {}};
    for (int i = 0; i < side; ++i)
        for (int j = 0; j < side; ++j) {
            p.coords.push_back((i + 0.5) / side);
            p.coords.push_back((j + 0.5) / side);
        }
    return p;
}

PointSet cantor_points(int level) {
    std::vector<double> x{0.0};
    for (int n = 1; n <= level; ++n) {
        std::vector<double> next;
        for (double v : x)
            for (int b : {0, 3}) next.push_back(v + b * std::pow(4.0, -n));
        x = std::move(next);
    }
    return PointSet{1, x};
}

Outcome reference_capacities() {
    const double one = reference_square_capacity(riesz_kernel(1.0), 60).value;
    const bool sq2 = reference_square_capacity(riesz_kernel(2.0), 40).divergent;
    const bool k_half = reference_cantor_capacity(riesz_kernel(0.5), 40).divergent;

    const Kernel fs = smooth(riesz_kernel(1.0), 1.0 / 64, 2);
    const double sq_eq = equilibrium_measure(grid_points(64), fs, 1e-3).capacity(fs).value;
    const double sq_ref = reference_square_capacity(fs, 40).value;
    const Kernel fk = smooth(riesz_kernel(0.25), std::pow(4.0, -8), 1);
    const double k_eq = equilibrium_measure(cantor_points(8), fk).capacity(fk).value;
    const double k_ref = reference_cantor_capacity(fk, 40).value;
    auto within8 = [](double a, double b) { return a / b <= 8.0 && b / a <= 8.0; };
    return {std::abs(one - 1.0) <= 1e-12 && sq2 && k_half && within8(sq_eq, sq_ref) && within8(k_eq, k_ref),
            fmt("riesz(1) square %.15f, divergent alpha=2 square %d, alpha=1/2 Cantor %d; square eq/ref %.3f/%.3f, "
                "Cantor eq/ref %.3f/%.3f",
                one, sq2, k_half, sq_eq, sq_ref, k_eq, k_ref)};
}

Outcome equilibrium_solver() {
    bool pass = true;
    int converged = 0, certified = 0, runs = 0;
    // Runs that hit max_iters are flagged by the solver; the certificate is checked on the rest.
    auto certify = [&](const EquilibriumResult& r, double tol) {
        ++runs;
        if (!r.converged) return;
        ++converged;
        if (r.gap <= tol * r.energy) ++certified;
        pass = pass && r.gap <= tol * r.energy;
    };

    double two_err = 0.0;
    const PointSet pair{2, {0.0, 0.0, 0.3, 0.4}};
    for (const Kernel& f : {gaussian_kernel(0.5), smooth(riesz_kernel(1.0), 0.01, 2), stable_potential_kernel(1.0, 3),
                            smooth(stable_potential_kernel(1.0, 3), 0.05, 3)}) {
        if (!f.bounded()) continue;
        const EquilibriumResult r = equilibrium_measure(pair, f, 1e-12);
        certify(r, 1e-12);
        pass = pass && r.converged;
        two_err = std::max({two_err, std::abs(r.weights[0] - 0.5), std::abs(r.weights[1] - 0.5),
                            std::abs(r.energy - (f.value_at_zero() + f.eval(0.5)) / 2) / r.energy});
    }
    pass = pass && two_err <= 1e-8;

    // Three collinear points; riesz(1) is averaged over discs since it is not integrable on the line.
    const PointSet three{2, {0.0, 0.0, 0.5, 0.0, 1.0, 0.0}};
    const Kernel f3 = smooth(riesz_kernel(1.0), 1.0 / 16, 2);
    auto energy = [&](const std::vector<double>& w) {
        double s = 0.0;
        for (std::size_t i = 0; i < 3; ++i)
            for (std::size_t j = 0; j < 3; ++j)
                s += w[i] * w[j] * (i == j ? f3.value_at_zero() : f3.eval(std::sqrt(squared_distance(three.point(i), three.point(j)))));
        return s;
    };
    double best = std::numeric_limits<double>::infinity();
    std::vector<double> arg(3);
    for (int i = 0; i <= 1000; ++i)
        for (int j = 0; i + j <= 1000; ++j) {
            const std::vector<double> w{i / 1000.0, j / 1000.0, (1000 - i - j) / 1000.0};
            const double e = energy(w);
            if (e < best) best = e, arg = w;
        }
    const EquilibriumResult r3 = equilibrium_measure(three, f3);
    certify(r3, 1e-6);
    pass = pass && r3.converged;
    double three_err = 0.0;
    for (int i = 0; i < 3; ++i) three_err = std::max(three_err, std::abs(r3.weights[i] - arg[i]));
    pass = pass && three_err <= 5e-3;

    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int t = 0; t < 20; ++t) {
        const int dim = 1 + t % 3;
        PointSet p{dim, {}};
        for (int i = 0; i < 100 * dim; ++i) p.coords.push_back(u(rng));
        const Kernel f = t % 2 ? gaussian_kernel(0.1) : smooth(riesz_kernel(0.5 * dim), 0.01, dim);
        certify(equilibrium_measure(p, f), 1e-6);
    }
    return {pass, fmt("two-point max error %.2e, three-point max weight error %.2e vs grid (%.3f, %.3f, %.3f), "
                      "gap <= tol * energy on %d/%d converged runs (%d runs, the rest stopped at max_iters)",
                      two_err, three_err, arg[0], arg[1], arg[2], certified, converged, runs)};
}

Outcome sausage_counts() {
    const auto c = sausage_config();
    const auto rows = remember("sausage", run_sausage_counts(c));
    int ok = 0;
    double worst = 0.0;
    for (const auto* r : select(rows, "band_ratio")) {
        if (r->estimate <= 6.0) ++ok;
        worst = std::max(worst, r->estimate);
    }
    const bool aborted = !select(rows, kAbortedQuantity).empty();
    return {ok == c.replicas && !aborted, fmt("band ratio <= 6 for %d/%d replicas (max %.3f)", ok, c.replicas, worst)};
}

Outcome zero_set_laws() {
    const auto c = zero_set_config();
    const auto rows = remember("zero-set", run_zero_set(c));
    int levy_ok = 0, band_ok = 0;
    for (const auto* r : select(rows, "levy_ratio"))
        if (r->scale == std::ldexp(1.0, -10) && r->estimate >= 0.5 && r->estimate <= 2.0) ++levy_ok;
    for (const auto* r : select(rows, "NZ_band"))
        if (r->estimate <= 4.0) ++band_ok;
    const auto slope_rows = select(rows, "L_slope");
    const double slope = slope_rows.empty() ? NAN : slope_rows[0]->estimate;
    const int need = static_cast<int>(std::ceil(0.9 * c.replicas));
    return {levy_ok >= need && band_ok >= need && slope >= 0.35 && slope <= 0.65,
            fmt("Levy ratio in [0.5, 2] for %d/%d, NZ band <= 4 for %d/%d, L slope %.4f (in [0.35, 0.65])", levy_ok,
                c.replicas, band_ok, c.replicas, slope)};
}

Outcome capacity_equivalence() {
    auto spreads = [](const std::vector<ExperimentRecord>& rows) {
        std::vector<double> v;
        for (const auto* r : select(rows, "R_spread")) v.push_back(r->estimate);
        return v;
    };
    const auto d3 = spreads(remember("cap-equiv-3", run_capacity_equivalence(cap_equiv_config(3))));
    const auto d2 = spreads(remember("cap-equiv-2", run_capacity_equivalence(cap_equiv_config(2))));
    const bool d3_ok = !d3.empty() && std::all_of(d3.begin(), d3.end(), [](double s) { return s >= 1.0 && s <= 50.0; });
    const bool d2_ok = !d2.empty() && std::all_of(d2.begin(), d2.end(), [](double s) { return s > 50.0; });
    auto range = [](const std::vector<double>& v) {
        return fmt("%.2f..%.2f", *std::min_element(v.begin(), v.end()), *std::max_element(v.begin(), v.end()));
    };
    return {d3_ok && d2_ok, fmt("d=3 spread %s (<= 50: %s); d=2 plain-kernel control spread %s (> 50: %s)",
                                range(d3).c_str(), d3_ok ? "yes" : "no", range(d2).c_str(), d2_ok ? "yes" : "no")};
}

Outcome approach_exponent() {
    const auto t0 = std::chrono::steady_clock::now();
    const auto c = approach_config();
    const auto rows = remember("approach", run_approach(c));
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const auto ex = select(rows, "exponent");
    const double exponent = ex.empty() ? NAN : ex[0]->estimate;
    int inside = 0, total = 0;
    double censored = 0.0;
    std::string probs;
    for (const auto* r : select(rows, "hit_probability")) {
        ++total;
        if (*r->find_diag("inside") != 0.0) ++inside;
        censored = std::max(censored, *r->find_diag("censored_fraction"));
        probs += fmt("%s%.4g", probs.empty() ? "" : ", ", r->estimate);
    }
    const bool pass = exponent >= 0.7 && exponent <= 1.3 && total > 0 && inside >= 0.9 * total && censored < 0.05 &&
                      secs <= 1800.0;
    return {pass, fmt("exponent %.4f (in [0.7, 1.3]), inside bracket %d/%d, max censored %.4f, p = [%s], %.0f s",
                      exponent, inside, total, censored, probs.c_str(), secs)};
}

Outcome reproducibility() {
    // Every full-scale experiment again, now with two workers; tables must match the first runs.
    const int saved = worker_count();
    set_worker_count(2);
    const std::map<std::string, std::function<std::vector<ExperimentRecord>()>> reruns{
        {"strong-law", [] { return run_strong_law(strong_law_config()); }},
        {"moments", [] { return run_moments(moments_config()); }},
        {"sausage", [] { return run_sausage_counts(sausage_config()); }},
        {"zero-set", [] { return run_zero_set(zero_set_config()); }},
        {"cap-equiv-3", [] { return run_capacity_equivalence(cap_equiv_config(3)); }},
        {"cap-equiv-2", [] { return run_capacity_equivalence(cap_equiv_config(2)); }},
        {"approach", [] { return run_approach(approach_config()); }},
    };
    int same = 0, compared = 0;
    std::string diff;
    for (const auto& [name, run] : reruns) {
        std::string first;
        if (auto it = first_runs().find(name); it != first_runs().end()) {
            first = it->second;
        } else {
            set_worker_count(1);
            first = csv(run());
            set_worker_count(2);
        }
        ++compared;
        if (csv(run()) == first)
            ++same;
        else
            diff += " " + name;
    }
    set_worker_count(saved);
    return {same == compared, fmt("%d/%d experiment tables byte-identical at 1 vs 2 workers%s%s", same, compared,
                                  diff.empty() ? "" : "; differing:", diff.c_str())};
}

std::set<int> parse_list(const char* text) {
    std::set<int> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) out.insert(std::stoi(item));
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    std::set<int> only, expect_fail;
    for (int i = 1; i + 1 < argc; i += 2) {
        const std::string flag = argv[i];
        if (flag == "--only")
            only = parse_list(argv[i + 1]);
        else if (flag == "--expect-fail")
            expect_fail = parse_list(argv[i + 1]);
        else {
            std::fprintf(stderr, "usage: acceptance [--only LIST] [--expect-fail LIST]\n");
            return 2;
        }
    }
    set_worker_count(1);

    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"strong law, d = 3", strong_law},
        {"first moment", first_moment},
        {"remainder orders", remainder_orders},
        {"monotonicity of sigma^-d S_sigma", monotonicity},
        {"dyadic energy comparability", dyadic_comparability},
        {"reference capacities", reference_capacities},
        {"equilibrium solver", equilibrium_solver},
        {"Wiener sausage box counts", sausage_counts},
        {"zero set", zero_set_laws},
        {"capacity equivalence uniformity", capacity_equivalence},
        {"approach exponent", approach_exponent},
        {"reproducibility", reproducibility},
    };

    std::set<int> failed;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i) + 1;
        if (!only.empty() && !only.count(id)) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (!o.pass) failed.insert(id);
        std::printf("%s %2d %s: %s [%.1f s]%s\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first.c_str(),
                    o.detail.c_str(), secs, !o.pass && expect_fail.count(id) ? " (expected)" : "");
        std::fflush(stdout);
    }

    std::set<int> expected;
    for (int id : expect_fail)
        if (only.empty() || only.count(id)) expected.insert(id);
    if (failed != expected) {
        for (int id : expected)
            if (!failed.count(id)) std::printf("note: criterion %d was expected to fail but passed\n", id);
        return 1;
    }
    return 0;
}
