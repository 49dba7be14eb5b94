#pragma once

#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace capmc {

/// Raised when a smoothing integral  eps^-d d \int_0^eps f(s) s^{d-1} ds  diverges,
/// i.e. the kernel has zero capacity for every set in R^d.
class DivergentKernel : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Malformed kernel specification string. `token()` names the offending piece.
class KernelSpecError : public std::invalid_argument {
public:
    KernelSpecError(std::string token, const std::string& what)
        : std::invalid_argument(what), token_(std::move(token)) {}
    const std::string& token() const { return token_; }

private:
    std::string token_;
};

enum class KernelFamily { riesz, stable_potential, log_adjusted, smoothed, table, constant, gaussian };

class Kernel;
using KernelPtr = std::shared_ptr<const Kernel>;

/// A weakly decreasing, nonnegative function of distance.
///
/// Kernels are immutable values; derived families (log-adjusted, smoothed) share
/// their base through a `shared_ptr<const Kernel>`, so copies are cheap and the
/// object can be evaluated concurrently from any thread.
class Kernel {
public:
    struct Riesz { double alpha; };
    struct StablePotential { double alpha; int dim; double constant; };
    struct LogAdjusted { KernelPtr base; };
    struct Smoothed { KernelPtr base; double eps; int dim; double plateau; };
    struct Table { std::vector<double> radii; std::vector<double> values; };
    struct Constant { double value; };
    struct Gaussian { double sigma; };

    using Repr = std::variant<Riesz, StablePotential, LogAdjusted, Smoothed, Table, Constant, Gaussian>;

    explicit Kernel(Repr repr);

    double eval(double r) const;
    double operator()(double r) const { return eval(r); }

    /// f(0); +inf for singular kernels.
    double value_at_zero() const;
    bool bounded() const;

    KernelFamily family() const;
    const Repr& repr() const { return repr_; }

    /// Radii in (0, inf) where eval may jump or kink (smoothing radii, table nodes).
    std::vector<double> breakpoints() const;

    /// Exponent p with f(r) ~ r^{-p} (up to logs) as r -> 0; 0 for bounded kernels.
    double singularity_exponent() const;

    /// Canonical specification string, parseable by parse_kernel.
    std::string describe() const;

private:
    Repr repr_;
};

Kernel riesz_kernel(double alpha);

/// c(alpha) r^{alpha-d}, the potential density of the symmetric alpha-stable process
/// with characteristic exponent |lambda|^alpha.
Kernel stable_potential_kernel(double alpha, int d);

/// c(alpha) = Gamma((d-alpha)/2) / (2^alpha pi^{d/2} Gamma(alpha/2)).
double stable_potential_constant(double alpha, int d);

/// f(r) * max(ln(1/r), 0).
Kernel log_adjusted(const Kernel& base);

/// Spherical average  eps^-d d \int_0^eps f(s) s^{d-1} ds.
/// Closed form for power laws and constants, adaptive quadrature otherwise.
/// Throws DivergentKernel when the integral does not converge.
double smoothed_value(const Kernel& base, double eps, int d);

/// f_eps: equals f on [eps, inf) and the spherical average below eps.
Kernel smooth(const Kernel& base, double eps, int d);

Kernel constant_kernel(double value);
Kernel gaussian_kernel(double sigma);

/// Piecewise-linear interpolation through (radii[i], values[i]); constant outside.
/// radii strictly increasing, values weakly decreasing and nonnegative.
Kernel table_kernel(std::vector<double> radii, std::vector<double> values);

/// f(side 2^-n) - f(side 2^{1-n}); +inf when f(side 2^-n) is infinite.
double dyadic_increment(const Kernel& k, int n, double side = 1.0);

/// Parses `riesz:alpha=0.5`, `stable:alpha=1,d=3`, `logadj:<spec>`,
/// `smooth:eps=0.01[,d=3]:<spec>`, `const:c=1`, `gauss:sigma=0.1`,
/// `table:r=0|0.5|1,f=3|2|1`. `default_dim` fills missing `d=` parameters.
Kernel parse_kernel(std::string_view spec, int default_dim);

}  // namespace capmc
