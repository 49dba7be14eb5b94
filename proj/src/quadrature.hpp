#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

namespace capmc::detail {

/// Adaptive Gauss-Kronrod on [a, b] split at geometric breakpoints a + scale 4^k, which
/// resolves integrands with a feature of width `scale` at the left endpoint.
template <class F>
double integrate_graded(F&& f, double a, double b, double scale, double rel_tol) {
    std::vector<double> cuts{a};
    if (scale > 0.0)
        for (double x = a + scale; x < b; x = a + (x - a) * 4.0) cuts.push_back(x);
    cuts.push_back(b);
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        double err = 0.0;
        total += boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, cuts[i], cuts[i + 1], 3, rel_tol,
                                                                               &err);
    }
    return total;
}

/// Tanh-sinh on [a, b], split at interior breakpoints; tolerates integrable endpoint singularities.
template <class F>
double integrate_singular(F&& f, double a, double b, std::vector<double> breaks, double rel_tol) {
    breaks.erase(std::remove_if(breaks.begin(), breaks.end(), [&](double x) { return !(x > a && x < b); }),
                 breaks.end());
    std::sort(breaks.begin(), breaks.end());
    std::vector<double> cuts{a};
    cuts.insert(cuts.end(), breaks.begin(), breaks.end());
    cuts.push_back(b);
    boost::math::quadrature::tanh_sinh<double> ts(15);
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) total += ts.integrate(f, cuts[i], cuts[i + 1], rel_tol);
    return total;
}

}  // namespace capmc::detail
