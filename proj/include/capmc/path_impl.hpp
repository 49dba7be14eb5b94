#pragma once

#include <cmath>
#include <numbers>
#include <random>

namespace capmc {

template <class Engine>
double positive_stable(double beta, Engine& eng) {
    std::uniform_real_distribution<double> unif(0.0, std::numbers::pi);
    std::exponential_distribution<double> expo(1.0);
    double u = unif(eng);
    while (u == 0.0) u = unif(eng);
    const double w = expo(eng);
    const double a = std::pow(std::sin(beta * u), beta / (1.0 - beta)) *
                     std::sin((1.0 - beta) * u) / std::pow(std::sin(u), 1.0 / (1.0 - beta));
    return std::pow(a / w, (1.0 - beta) / beta);
}

}  // namespace capmc
