#include "capmc/path.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include <boost/random/normal_distribution.hpp>

#include "capmc/records.hpp"
#include "capmc/rng.hpp"

namespace capmc {

namespace {

PathSample blank_path(int dim, std::size_t n_steps, double horizon, std::span<const double> start,
                      std::uint64_t seed) {
    if (dim < 1) throw std::invalid_argument("path dimension must be >= 1");
    if (n_steps < 1) throw std::invalid_argument("path needs n_steps >= 1");
    if (!(horizon > 0.0)) throw std::invalid_argument("path horizon must be positive");
    if (!start.empty() && start.size() != static_cast<std::size_t>(dim))
        throw std::invalid_argument("start point has the wrong dimension");
    PathSample p;
    p.dim = dim;
    p.n_steps = n_steps;
    p.horizon = horizon;
    p.seed = seed;
    p.start.assign(static_cast<std::size_t>(dim), 0.0);
    std::copy(start.begin(), start.end(), p.start.begin());
    p.positions.resize((n_steps + 1) * static_cast<std::size_t>(dim));
    std::copy(p.start.begin(), p.start.end(), p.positions.begin());
    return p;
}

}  // namespace

PathSample sample_brownian(int dim, std::size_t n_steps, double horizon, std::uint64_t seed,
                           std::span<const double> start) {
    PathSample p = blank_path(dim, n_steps, horizon, start, seed);
    Engine eng = make_engine(seed);
    boost::random::normal_distribution<double> normal(0.0, std::sqrt(p.step()));
    const std::size_t d = static_cast<std::size_t>(dim);
    double* x = p.positions.data();
    for (std::size_t i = 1; i <= n_steps; ++i)
        for (std::size_t k = 0; k < d; ++k) x[i * d + k] = x[(i - 1) * d + k] + normal(eng);
    return p;
}

PathSample sample_stable(double alpha, int dim, std::size_t n_steps, double horizon,
                         std::span<const double> start, std::uint64_t seed) {
    if (!(alpha > 0.0 && alpha <= 2.0)) throw std::invalid_argument("stable index alpha must lie in (0, 2]");
    PathSample p = blank_path(dim, n_steps, horizon, start, seed);
    p.process = ProcessKind::stable;
    p.alpha = alpha;
    Engine eng = make_engine(seed);
    boost::random::normal_distribution<double> normal;
    const double beta = alpha / 2.0;
    // S_dt has the law of dt^{1/beta} S_1.
    const double clock_scale = std::pow(p.step(), 1.0 / beta);
    const std::size_t d = static_cast<std::size_t>(dim);
    double* x = p.positions.data();
    for (std::size_t i = 1; i <= n_steps; ++i) {
        const double ds = alpha == 2.0 ? p.step() : clock_scale * positive_stable(beta, eng);
        const double sd = std::sqrt(2.0 * ds);
        for (std::size_t k = 0; k < d; ++k) x[i * d + k] = x[(i - 1) * d + k] + sd * normal(eng);
    }
    return p;
}

ZeroSetSample zero_set(const PathSample& path) {
    if (path.dim != 1) throw std::invalid_argument("zero set needs a one-dimensional path");
    const auto v = path.values();
    const double dt = path.step();
    ZeroSetSample zs;
    zs.horizon = path.horizon;
    for (std::size_t i = 0; i <= path.n_steps; ++i) {
        if (v[i] == 0.0) {
            zs.zero_times.push_back(path.time(i));
        } else if (i < path.n_steps && v[i + 1] != 0.0 && (v[i] < 0.0) != (v[i + 1] < 0.0)) {
            const double t = path.time(i) + dt * v[i] / (v[i] - v[i + 1]);
            zs.zero_times.push_back(std::clamp(t, path.time(i), path.time(i + 1)));
        }
    }
    double prev = 0.0;
    for (double z : zs.zero_times) {
        if (z > prev) zs.excursions.push_back({prev, z});
        prev = z;
    }
    if (path.horizon > prev) zs.excursions.push_back({prev, path.horizon});
    return zs;
}

std::size_t excursion_count(const ZeroSetSample& zs, double delta) {
    return static_cast<std::size_t>(std::count_if(zs.excursions.begin(), zs.excursions.end(),
                                                  [delta](const Interval& I) { return I.length() > delta; }));
}

double LocalTimeProfile::at(double t) const {
    if (values.empty()) return 0.0;
    const double tc = std::clamp(t, 0.0, horizon);
    const double u = tc / step;
    const std::size_t last = values.size() - 1;
    const std::size_t i = std::min(static_cast<std::size_t>(u), last);
    if (i == last) return values[last];
    const double frac = u - static_cast<double>(i);
    return values[i] + frac * (values[i + 1] - values[i]);
}

LocalTimeProfile local_time_profile(const PathSample& path, double bandwidth) {
    if (path.dim != 1) throw std::invalid_argument("local time needs a one-dimensional path");
    const double h = bandwidth > 0.0 ? bandwidth : std::sqrt(path.step());
    LocalTimeProfile lt;
    lt.step = path.step();
    lt.horizon = path.horizon;
    lt.bandwidth = h;
    lt.values.resize(path.n_steps + 1);
    const auto v = path.values();
    const double unit = lt.step / (2.0 * h);
    std::size_t count = 0;
    lt.values[0] = 0.0;
    for (std::size_t i = 1; i <= path.n_steps; ++i) {
        if (std::abs(v[i]) <= h) ++count;
        lt.values[i] = static_cast<double>(count) * unit;
    }
    return lt;
}

WeightedMeasure occupation_measure(const PathSample& path, std::size_t stride) {
    if (stride < 1 || path.n_steps % stride != 0)
        throw std::invalid_argument("occupation stride must divide n_steps");
    const std::size_t n = path.n_steps / stride;
    const std::size_t d = static_cast<std::size_t>(path.dim);
    std::vector<double> coords(n * d);
    for (std::size_t k = 1; k <= n; ++k) {
        const auto x = path.point(k * stride);
        std::copy(x.begin(), x.end(), coords.begin() + static_cast<std::ptrdiff_t>((k - 1) * d));
    }
    return WeightedMeasure(path.dim, std::move(coords),
                           std::vector<double>(n, static_cast<double>(stride) * path.step()));
}

WeightedMeasure local_time_measure(const PathSample& path, double bandwidth) {
    if (path.dim != 1) throw std::invalid_argument("local time needs a one-dimensional path");
    if (!(bandwidth > 0.0)) throw std::invalid_argument("local time bandwidth must be positive");
    const auto v = path.values();
    std::vector<double> times;
    for (std::size_t i = 1; i <= path.n_steps; ++i)
        if (std::abs(v[i]) <= bandwidth) times.push_back(path.time(i));
    const double w = path.step() / (2.0 * bandwidth);
    std::vector<double> weights(times.size(), w);
    return WeightedMeasure(1, std::move(times), std::move(weights));
}

void write_path_csv(const PathSample& path, std::ostream& os) {
    os << "t";
    for (int k = 1; k <= path.dim; ++k) os << ",x" << k;
    os << '\n';
    for (std::size_t i = 0; i <= path.n_steps; ++i) {
        os << format_number(path.time(i));
        for (double c : path.point(i)) os << ',' << format_number(c);
        os << '\n';
    }
}

}  // namespace capmc
