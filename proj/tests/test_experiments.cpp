#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include "capmc/experiments.hpp"
#include "capmc/parallel.hpp"
#include "json.hpp"

using namespace capmc;
using doctest::Approx;

namespace {

std::string csv(const std::vector<ExperimentRecord>& rows) {
    std::ostringstream os;
    write_csv(rows, os);
    return os.str();
}

std::vector<const ExperimentRecord*> select(const std::vector<ExperimentRecord>& rows, const std::string& quantity) {
    std::vector<const ExperimentRecord*> out;
    for (const auto& r : rows)
        if (r.quantity == quantity) out.push_back(&r);
    return out;
}

template <class Run>
void check_thread_invariance(Run&& run) {
    const int saved = worker_count();
    set_worker_count(1);
    const std::string one = csv(run());
    set_worker_count(2);
    const std::string two = csv(run());
    const std::string again = csv(run());
    set_worker_count(saved);
    CHECK(one == two);
    CHECK(two == again);
}

/// First master seed whose replica-0 path of `n_steps` steps leaves [-L, L]^dim.
std::uint64_t escaping_seed(int dim, std::size_t n_steps) {
    for (std::uint64_t seed = 0;; ++seed) {
        const PathSample p = replica_path(dim, n_steps, seed, 0);
        for (double x : p.positions)
            if (std::abs(x) >= kPathBoxHalfWidth) return seed;
    }
}

}  // namespace

TEST_CASE("records: CSV and JSON lines") {
    ExperimentRecord r;
    r.experiment = "strong-law";
    r.replica = 0;
    r.quantity = "S_ratio";
    r.scale_kind = "sigma";
    r.scale = 0.125;
    r.estimate = 4.1;
    r.diag("S", 0.0640625).diag("pairs", 12);
    r.seed = 42;
    ExperimentRecord agg = r;
    agg.replica = -1;
    agg.reference = 3.5;
    agg.diagnostics.clear();
    CHECK(csv({r, agg}) ==
          "experiment,replica,quantity,scale_kind,scale,estimate,reference,diagnostics,seed\n"
          "strong-law,0,S_ratio,sigma,0.125,4.1,n/a,S=0.0640625;pairs=12,42\n"
          "strong-law,-1,S_ratio,sigma,0.125,4.1,3.5,,42\n");

    std::ostringstream os;
    write_records({r, agg}, OutputFormat::jsonl, os);
    std::istringstream lines(os.str());
    std::string line;
    std::getline(lines, line);
    const auto j = nlohmann::json::parse(line);
    CHECK(j["experiment"] == "strong-law");
    CHECK(j["replica"] == 0);
    CHECK(j["reference"] == "n/a");
    CHECK(j["diagnostics"]["S"].get<double>() == 0.0640625);
    CHECK(j["seed"] == 42);
    std::getline(lines, line);
    CHECK(nlohmann::json::parse(line)["reference"].get<double>() == 3.5);

    CHECK(format_number(0.1) == "0.1");
    CHECK(format_number(1e-300) == "1e-300");
    CHECK(format_number(std::nan("")) == "nan");
    CHECK(format_number(-INFINITY) == "-inf");
}

TEST_CASE("expected S: quadrature against the d = 3 antiderivative") {
    for (double s : {1e-3, 0.01, 0.05, 0.1, 0.25, 0.5, 1.0, 3.0})
        CHECK(expected_S_quadrature(s, 3) == Approx(expected_S_closed_form_d3(s)).epsilon(1e-9));
}

TEST_CASE("expected S: d = 3 remainder is O(sigma^3)") {
    std::vector<double> K;
    for (double s : {0.1, 0.05, 0.025}) K.push_back(std::abs(expected_S_quadrature(s, 3) - 4 * s * s) / (s * s * s));
    // The antiderivative expands as 4 s^2 - 8 s^3 + O(s^4), so the fitted constant tends to 8.
    for (double k : K) {
        CHECK(k >= 7.0);
        CHECK(k <= 8.0);
    }
    CHECK(*std::max_element(K.begin(), K.end()) / *std::min_element(K.begin(), K.end()) <= 1.1);
}

TEST_CASE("expected S: limits") {
    for (int d : {2, 3, 4, 5}) CHECK(expected_S_quadrature(1e4, d) == Approx(1.0).epsilon(1e-6));
    CHECK(expected_S_quadrature(1e-3, 4) / 1e-6 == Approx(2.0).epsilon(0.01));
    CHECK(expected_S_quadrature(1e-3, 5) / 1e-6 == Approx(4.0 / 3).epsilon(0.01));
}

TEST_CASE("second moment I1") {
    const double s = 1e-3;
    CHECK(8 * second_moment_I1_quadrature(s, 3) / std::pow(4 * s * s, 2) == Approx(1.0).epsilon(0.02));
    for (double sigma : {0.01, 0.1, 0.5}) {
        for (int d : {3, 4}) {
            const double full = second_moment_I1_quadrature(sigma, d);
            CHECK(second_moment_I1_half_triangle(sigma, d) == Approx(full).epsilon(1e-10));
        }
    }
    // (1 - s1 - s3)^2 / 2 over the unit triangle is 1/24.
    CHECK(second_moment_I1_quadrature(1e4, 3) == Approx(1.0 / 24).epsilon(1e-6));
}

TEST_CASE("moments experiment rows") {
    MomentsConfig c;
    c.dim = 3;
    c.sigmas = {0.1, 0.05, 0.025};
    const auto rows = run_moments(c);
    const auto es = select(rows, "expected_S");
    REQUIRE(es.size() == 3);
    for (const auto* r : es) CHECK(r->estimate == Approx(expected_S_quadrature(r->scale, 3)).epsilon(1e-12));
    const auto slope = select(rows, "remainder_slope");
    REQUIRE(slope.size() == 1);
    CHECK(slope[0]->estimate == Approx(3.0).epsilon(0.1));
    CHECK(select(rows, "I1_ratio").size() == 3);
    CHECK(select(rows, "S").empty());
}

TEST_CASE("strong law: guard, targets and determinism") {
    StrongLawConfig c;
    c.dim = 3;
    c.n_steps = std::size_t{1} << 12;
    c.sigmas = {0.25, 0.125, 0.0625};
    c.replicas = 3;
    c.seed = 7;
    CHECK_NOTHROW(validate(c));
    StrongLawConfig bad = c;
    bad.sigmas.push_back(0.06);  // 4 / 64 = 0.0625
    CHECK_THROWS_AS(run_strong_law(bad), GuardViolation);

    const auto rows = run_strong_law(c);
    const auto ratios = select(rows, "S_ratio");
    CHECK(ratios.size() == 9);
    for (const auto* r : ratios) {
        CHECK(r->seed == 7);
        CHECK(r->replica >= 0);
        CHECK(*r->find_diag("target") == 4.0);
        CHECK(*r->reference == Approx(expected_S_quadrature(r->scale, 3) / (r->scale * r->scale)));
        CHECK(r->estimate > 0.0);
    }
    CHECK(select(rows, "S_ratio_mean").size() == 3);
    check_thread_invariance([&] { return run_strong_law(c); });

    StrongLawConfig five = c;
    five.dim = 5;
    five.replicas = 1;
    for (const auto* r : select(run_strong_law(five), "S_ratio")) CHECK(*r->find_diag("target") == Approx(4.0 / 3));
}

TEST_CASE("strong law: replica rows do not depend on the replica count") {
    StrongLawConfig c;
    c.n_steps = std::size_t{1} << 10;
    c.sigmas = {0.25, 0.125};
    c.replicas = 2;
    const auto small = run_strong_law(c);
    c.replicas = 4;
    const auto large = run_strong_law(c);
    for (std::size_t i = 0; i < 4; ++i) CHECK(csv({small[i]}) == csv({large[i]}));
}

TEST_CASE("sausage counts") {
    SausageConfig c;
    c.dim = 3;
    c.n_steps = std::size_t{1} << 14;
    c.n_min = 0;
    c.n_max = 7;
    c.replicas = 3;
    const auto rows = run_sausage_counts(c);
    for (const auto* r : select(rows, "N_scaled")) {
        CHECK(*r->find_diag("N") <= static_cast<double>(c.n_steps));
        if (r->scale == 0) CHECK(r->estimate == 1.0);
    }
    CHECK(select(rows, "band_ratio").size() == 3);
    check_thread_invariance([&] { return run_sausage_counts(c); });

    SausageConfig bad = c;
    bad.n_max = 8;  // 2^8 > 2^7
    CHECK_THROWS_AS(run_sausage_counts(bad), GuardViolation);
    bad = c;
    bad.n_min = 5;
    bad.n_max = 4;
    CHECK_THROWS_AS(run_sausage_counts(bad), GuardViolation);

    c.dim = 2;
    c.replicas = 1;
    const auto two = run_sausage_counts(c);
    CHECK(select(two, "nN_scaled").size() == 8);
}

TEST_CASE("escaping paths abort their replica with a marked row") {
    const std::size_t n = 64;
    const std::uint64_t seed = escaping_seed(3, n);
    SausageConfig c;
    c.n_steps = n;
    c.n_min = 0;
    c.n_max = 3;
    c.replicas = 1;
    c.seed = seed;
    const auto rows = run_sausage_counts(c);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].quantity == kAbortedQuantity);
    CHECK(rows[0].seed == seed);
    CHECK(rows[0].replica == 0);

    CapEquivConfig e;
    e.n_steps = n;
    e.n_max = 4;
    e.alphas = {1.0};
    e.replicas = 1;
    e.seed = seed;
    CHECK(run_capacity_equivalence(e)[0].quantity == kAbortedQuantity);
}

TEST_CASE("capacity equivalence: rows, guards and divergence flags") {
    CapEquivConfig c;
    c.dim = 3;
    c.n_steps = std::size_t{1} << 14;
    c.n_max = 8;
    c.alphas = {0.5, 1.0, 1.5, 2.5};
    c.replicas = 2;
    const auto rows = run_capacity_equivalence(c);
    const auto R = select(rows, "R");
    REQUIRE(R.size() == 8);
    for (const auto* r : R) {
        const bool ref = *r->find_diag("divergent_reference") != 0.0;
        const bool occ = *r->find_diag("divergent_occupation") != 0.0;
        CAPTURE(r->scale);
        CHECK(ref == occ);
        CHECK(ref == (r->scale >= 2.0));
        if (!ref) CHECK(r->estimate > 0.0);
    }
    for (const auto* r : select(rows, "R_spread")) CHECK(r->estimate >= 1.0);
    check_thread_invariance([&] { return run_capacity_equivalence(c); });

    CapEquivConfig bad = c;
    bad.alphas = {1.0, 1.95};
    CHECK_THROWS_AS(validate(bad), GuardViolation);
    bad.alphas = {1.0, 2.1};
    CHECK_NOTHROW(validate(bad));
    bad.alphas = {3.0};
    CHECK_THROWS_AS(validate(bad), GuardViolation);
}

TEST_CASE("zero set: degenerate path without zeros") {
    PathSample p;
    p.dim = 1;
    p.n_steps = 1024;
    for (std::size_t i = 0; i <= p.n_steps; ++i) p.positions.push_back(0.1 + static_cast<double>(i) / 1024);
    ZeroSetConfig c;
    c.deltas = {0.25, 0.0625, 1.0 / 64};
    c.n_min = 2;
    c.n_max = 6;
    c.replicas = 1;
    const auto rows = zero_set_records(p, c, 0);
    for (const auto* r : select(rows, "levy_ratio")) {
        CHECK(*r->find_diag("N_delta") <= 1.0);
        CHECK(r->find_diag("empty_zero_set").has_value());
        CHECK(std::isnan(r->estimate));
    }
    for (const auto* r : select(rows, "L_scaled")) CHECK(*r->find_diag("L") == 0.0);
    const auto energy = select(rows, "energy_ratio");
    CHECK(energy.size() == c.energy_alphas.size());
    for (const auto* r : energy) CHECK(*r->find_diag("empty_zero_set") == 1.0);
}

TEST_CASE("zero set: guards and determinism") {
    ZeroSetConfig c;
    c.n_steps = std::size_t{1} << 12;
    c.deltas = {0.0625, 0.015625, 1.0 / 256};
    c.n_min = 2;
    c.n_max = 8;
    c.replicas = 3;
    CHECK_NOTHROW(validate(c));
    check_thread_invariance([&] { return run_zero_set(c); });
    const auto rows = run_zero_set(c);
    CHECK(select(rows, "L_mean").size() == 3);
    CHECK(select(rows, "L_slope").size() == 1);

    ZeroSetConfig bad = c;
    bad.deltas.push_back(1.0 / 1024);  // below 10 steps
    CHECK_THROWS_AS(validate(bad), GuardViolation);
    bad = c;
    bad.n_max = 9;  // 2^-9 < 10 / 4096
    CHECK_THROWS_AS(validate(bad), GuardViolation);
    bad = c;
    bad.energy_alphas = {0.45};
    CHECK_THROWS_AS(validate(bad), GuardViolation);
    bad.energy_alphas = {0.4, 0.6};
    CHECK_NOTHROW(validate(bad));
}

TEST_CASE("approach: guards") {
    ApproachConfig c;
    c.dim = 4;
    c.alpha = 1.0;
    c.n_steps = std::size_t{1} << 12;
    c.n_max = 8;
    c.eps = {0.25, 0.125};
    CHECK_NOTHROW(validate(c));
    ApproachConfig bad = c;
    bad.alpha = 2.5;
    CHECK_THROWS_AS(validate(bad), GuardViolation);
    bad = c;
    bad.dim = 3;
    bad.alpha = 1.5;
    CHECK_THROWS_AS(validate(bad), GuardViolation);
    bad = c;
    bad.eps = {0.01};  // 4 / 64 = 0.0625
    CHECK_THROWS_AS(validate(bad), GuardViolation);
    bad = c;
    bad.x_start = {1.0, 0.0};
    CHECK_THROWS_AS(validate(bad), GuardViolation);
}

TEST_CASE("approach: small run is deterministic and carries censoring diagnostics") {
    ApproachConfig c;
    c.dim = 4;
    c.alpha = 1.0;
    c.n_steps = std::size_t{1} << 12;
    c.n_max = 8;
    c.eps = {0.25, 0.125};
    c.mc_paths = 500;
    check_thread_invariance([&] { return run_approach(c); });
    const auto rows = run_approach(c);
    const auto p = select(rows, "hit_probability");
    REQUIRE(p.size() == 2);
    for (const auto* r : p) {
        CHECK(r->estimate >= 0.0);
        CHECK(r->estimate <= 1.0);
        CHECK(r->find_diag("censored_fraction").has_value());
    }
    CHECK(p[0]->estimate >= p[1]->estimate);
}

TEST_CASE("log-log slope") {
    const std::vector<double> x{1, 2, 4, 8};
    std::vector<double> y;
    for (double v : x) y.push_back(3 * std::pow(v, 1.5));
    CHECK(log_log_slope(x, y) == Approx(1.5).epsilon(1e-12));
}
