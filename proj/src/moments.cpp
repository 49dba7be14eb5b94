#include <cmath>
#include <stdexcept>

#include "capmc/experiments.hpp"
#include "quadrature.hpp"

namespace capmc {

namespace {

void check(double sigma, int d) {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw std::invalid_argument("sigma must be positive and finite");
    if (d < 1) throw std::invalid_argument("dimension must be >= 1");
}

/// sigma^d (sigma^2 + s)^{-d/2} = (1 + s / sigma^2)^{-d/2}, written to stay finite for tiny sigma.
double scaled_density(double s, double sigma, int d) { return std::pow(1.0 + s / (sigma * sigma), -0.5 * d); }

}  // namespace

double expected_S_quadrature(double sigma, int d) {
    check(sigma, d);
    auto f = [&](double s) { return (1.0 - s) * scaled_density(s, sigma, d); };
    return 2.0 * detail::integrate_graded(f, 0.0, 1.0, sigma * sigma, 1e-12);
}

double expected_S_closed_form_d3(double sigma) {
    check(sigma, 3);
    // 8 sigma^4 - 8 sigma^3 sqrt(1 + sigma^2) rewritten without cancellation.
    return 4.0 * sigma * sigma - 8.0 * sigma * sigma * sigma / (sigma + std::sqrt(1.0 + sigma * sigma));
}

namespace {

/// \int_0^{upper} (c - s3)^2 / 2 * density(s3) ds3 with c = 1 - s1.
double inner(double s1, double upper, double sigma, int d) {
    if (upper <= 0.0) return 0.0;
    const double c = 1.0 - s1;
    auto f = [&](double s3) { return 0.5 * (c - s3) * (c - s3) * scaled_density(s3, sigma, d); };
    return detail::integrate_graded(f, 0.0, upper, sigma * sigma, 1e-12);
}

}  // namespace

double second_moment_I1_quadrature(double sigma, int d) {
    check(sigma, d);
    auto outer = [&](double s1) { return scaled_density(s1, sigma, d) * inner(s1, 1.0 - s1, sigma, d); };
    return detail::integrate_graded(outer, 0.0, 1.0, sigma * sigma, 1e-11);
}

double second_moment_I1_half_triangle(double sigma, int d) {
    check(sigma, d);
    auto outer = [&](double s1) {
        return scaled_density(s1, sigma, d) * inner(s1, std::min(s1, 1.0 - s1), sigma, d);
    };
    // The inner limit kinks at s1 = 1/2.
    return 2.0 * (detail::integrate_graded(outer, 0.0, 0.5, sigma * sigma, 1e-11) +
                  detail::integrate_graded(outer, 0.5, 1.0, 0.0, 1e-11));
}

double log_log_slope(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("slope fit needs >= 2 matching points");
    double mx = 0.0, my = 0.0;
    const double n = static_cast<double>(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw std::invalid_argument("slope fit needs positive values");
        mx += std::log(x[i]) / n;
        my += std::log(y[i]) / n;
    }
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = std::log(x[i]) - mx;
        sxy += dx * (std::log(y[i]) - my);
        sxx += dx * dx;
    }
    if (!(sxx > 0.0)) throw std::invalid_argument("slope fit needs distinct x values");
    return sxy / sxx;
}

}  // namespace capmc
