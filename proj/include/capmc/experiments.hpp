#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "capmc/kernel.hpp"
#include "capmc/path.hpp"
#include "capmc/records.hpp"

namespace capmc {

/// A configuration violates a resolution or range guard; what() names the inequality.
class GuardViolation : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// E S_sigma = 2 sigma^d \int_0^1 (1 - s) (sigma^2 + s)^{-d/2} ds, adaptive quadrature.
double expected_S_quadrature(double sigma, int d);

/// d = 3 antiderivative: 4 sigma^2 + 8 sigma^4 - 8 sigma^3 sqrt(1 + sigma^2).
double expected_S_closed_form_d3(double sigma);

/// I_1 = sigma^{2d} \iint_{s1+s3<=1} (1-s1-s3)^2/2 (sigma^2+s1)^{-d/2} (sigma^2+s3)^{-d/2}.
double second_moment_I1_quadrature(double sigma, int d);

/// Same integral over s3 <= s1, doubled (the integrand is symmetric).
double second_moment_I1_half_triangle(double sigma, int d);

/// Box [-L, L]^d that paths are mapped from onto the unit cube.
inline constexpr double kPathBoxHalfWidth = 4.0;

/// Brownian path on [0, 1] that replica `replica` of an experiment with master seed `seed` uses.
PathSample replica_path(int dim, std::size_t n_steps, std::uint64_t seed, int replica);

/// Quantity of the row emitted in place of a replica whose path left the box.
inline constexpr const char* kAbortedQuantity = "replica_aborted";

struct StrongLawConfig {
    int dim = 3;
    std::size_t n_steps = std::size_t{1} << 22;
    std::vector<double> sigmas;
    int replicas = 8;
    std::uint64_t seed = 42;
    double cutoff = 6.0;
    /// Occupation atoms are coarsened in time to step <= sigma^2 / points_per_sigma2.
    double points_per_sigma2 = 16.0;
};

void validate(const StrongLawConfig& c);
std::vector<ExperimentRecord> run_strong_law(const StrongLawConfig& c);

struct MomentsConfig {
    int dim = 3;
    std::vector<double> sigmas;
    int replicas = 0;  // 0: quadrature only
    std::size_t n_steps = std::size_t{1} << 18;
    std::uint64_t seed = 42;
    double cutoff = 6.0;
    double points_per_sigma2 = 16.0;
};

void validate(const MomentsConfig& c);
std::vector<ExperimentRecord> run_moments(const MomentsConfig& c);

struct SausageConfig {
    int dim = 3;
    std::size_t n_steps = std::size_t{1} << 22;
    int n_min = 3;
    int n_max = 9;
    int replicas = 5;
    std::uint64_t seed = 42;
};

void validate(const SausageConfig& c);
std::vector<ExperimentRecord> run_sausage_counts(const SausageConfig& c);

struct CapEquivConfig {
    int dim = 3;
    std::vector<double> alphas;
    std::size_t n_steps = std::size_t{1} << 20;
    int n_max = 12;
    int replicas = 5;
    std::uint64_t seed = 42;
    /// d = 2 only: compare with the reference capacity of f~ = f log(1/r) (true) or of f (false).
    bool log_adjust = true;
};

void validate(const CapEquivConfig& c);
std::vector<ExperimentRecord> run_capacity_equivalence(const CapEquivConfig& c);

struct ZeroSetConfig {
    std::size_t n_steps = std::size_t{1} << 22;
    std::vector<double> deltas;  // Levy counts and quadratic variation
    int n_min = 4;
    int n_max = 9;
    std::vector<double> energy_alphas{0.1, 0.2, 0.3, 0.4};
    int replicas = 50;
    std::uint64_t seed = 42;
};

void validate(const ZeroSetConfig& c);
std::vector<ExperimentRecord> run_zero_set(const ZeroSetConfig& c);

/// Per-path part of run_zero_set, for any one-dimensional path on [0, 1].
std::vector<ExperimentRecord> zero_set_records(const PathSample& path, const ZeroSetConfig& c, int replica);

struct ApproachConfig {
    int dim = 4;
    double alpha = 1.0;
    std::size_t n_steps = std::size_t{1} << 16;
    std::vector<double> eps;
    std::vector<double> x_start;  // empty: automatic, 0.5 beyond the path along e1
    std::size_t mc_paths = 100000;
    std::uint64_t seed = 42;
    int n_max = 11;
    /// Walk budget per stable path; walks that neither hit nor escape are censored.
    std::size_t max_steps = 100000;
    /// Escape radius as a multiple of the path diameter.
    double escape_factor = 20.0;
    /// Comparability factor applied to both bracket ends.
    double bracket_widening = 64.0;
};

void validate(const ApproachConfig& c);
std::vector<ExperimentRecord> run_approach(const ApproachConfig& c);

/// Least-squares slope of log(y) on log(x).
double log_log_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace capmc
