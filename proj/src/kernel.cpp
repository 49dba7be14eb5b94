#include "capmc/kernel.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>

#include "quadrature.hpp"

namespace capmc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

std::string num(double x) {
    std::ostringstream os;
    os.precision(17);
    os << x;
    return os.str();
}

}  // namespace

Kernel::Kernel(Repr repr) : repr_(std::move(repr)) {}

double Kernel::eval(double r) const {
    return std::visit(
        Overloaded{
            [r](const Riesz& k) { return r == 0.0 ? kInf : std::pow(r, -k.alpha); },
            [r](const StablePotential& k) {
                return r == 0.0 ? kInf : k.constant * std::pow(r, k.alpha - k.dim);
            },
            [r](const LogAdjusted& k) {
                if (r >= 1.0) return 0.0;
                const double b = k.base->eval(r);
                if (b == 0.0) return 0.0;
                return r == 0.0 ? kInf : b * std::log(1.0 / r);
            },
            [r](const Smoothed& k) { return r < k.eps ? k.plateau : k.base->eval(r); },
            [r](const Table& k) {
                const auto& x = k.radii;
                const auto& y = k.values;
                if (r <= x.front()) return y.front();
                if (r >= x.back()) return y.back();
                const auto it = std::upper_bound(x.begin(), x.end(), r);
                const std::size_t i = static_cast<std::size_t>(it - x.begin());
                const double t = (r - x[i - 1]) / (x[i] - x[i - 1]);
                return y[i - 1] + t * (y[i] - y[i - 1]);
            },
            [](const Constant& k) { return k.value; },
            [r](const Gaussian& k) { return std::exp(-r * r / (2.0 * k.sigma * k.sigma)); },
        },
        repr_);
}

double Kernel::value_at_zero() const {
    return std::visit(Overloaded{
                          [](const Riesz&) { return kInf; },
                          [](const StablePotential&) { return kInf; },
                          [](const LogAdjusted& k) { return k.base->value_at_zero() == 0.0 ? 0.0 : kInf; },
                          [](const Smoothed& k) { return k.plateau; },
                          [](const Table& k) { return k.values.front(); },
                          [](const Constant& k) { return k.value; },
                          [](const Gaussian&) { return 1.0; },
                      },
                      repr_);
}

bool Kernel::bounded() const { return std::isfinite(value_at_zero()); }

KernelFamily Kernel::family() const {
    return std::visit(Overloaded{
                          [](const Riesz&) { return KernelFamily::riesz; },
                          [](const StablePotential&) { return KernelFamily::stable_potential; },
                          [](const LogAdjusted&) { return KernelFamily::log_adjusted; },
                          [](const Smoothed&) { return KernelFamily::smoothed; },
                          [](const Table&) { return KernelFamily::table; },
                          [](const Constant&) { return KernelFamily::constant; },
                          [](const Gaussian&) { return KernelFamily::gaussian; },
                      },
                      repr_);
}

std::vector<double> Kernel::breakpoints() const {
    return std::visit(Overloaded{
                          [](const LogAdjusted& k) {
                              auto b = k.base->breakpoints();
                              b.push_back(1.0);
                              return b;
                          },
                          [](const Smoothed& k) {
                              auto b = k.base->breakpoints();
                              b.push_back(k.eps);
                              return b;
                          },
                          [](const Table& k) { return k.radii; },
                          [](const auto&) { return std::vector<double>{}; },
                      },
                      repr_);
}

double Kernel::singularity_exponent() const {
    return std::visit(Overloaded{
                          [](const Riesz& k) { return k.alpha; },
                          [](const StablePotential& k) { return static_cast<double>(k.dim) - k.alpha; },
                          [](const LogAdjusted& k) { return k.base->singularity_exponent(); },
                          [](const auto&) { return 0.0; },
                      },
                      repr_);
}

std::string Kernel::describe() const {
    return std::visit(
        Overloaded{
            [](const Riesz& k) { return "riesz:alpha=" + num(k.alpha); },
            [](const StablePotential& k) {
                return "stable:alpha=" + num(k.alpha) + ",d=" + std::to_string(k.dim);
            },
            [](const LogAdjusted& k) { return "logadj:" + k.base->describe(); },
            [](const Smoothed& k) {
                return "smooth:eps=" + num(k.eps) + ",d=" + std::to_string(k.dim) + ":" + k.base->describe();
            },
            [](const Table& k) {
                std::string r = "table:r=", f = ",f=";
                for (std::size_t i = 0; i < k.radii.size(); ++i) {
                    r += (i ? "|" : "") + num(k.radii[i]);
                    f += (i ? "|" : "") + num(k.values[i]);
                }
                return r + f;
            },
            [](const Constant& k) { return "const:c=" + num(k.value); },
            [](const Gaussian& k) { return "gauss:sigma=" + num(k.sigma); },
        },
        repr_);
}

Kernel riesz_kernel(double alpha) {
    if (!(alpha > 0.0) || !std::isfinite(alpha)) throw std::invalid_argument("riesz kernel needs alpha > 0");
    return Kernel(Kernel::Riesz{alpha});
}

double stable_potential_constant(double alpha, int d) {
    return std::tgamma((d - alpha) / 2.0) /
           (std::pow(2.0, alpha) * std::pow(std::numbers::pi, d / 2.0) * std::tgamma(alpha / 2.0));
}

Kernel stable_potential_kernel(double alpha, int d) {
    if (!(alpha > 0.0 && alpha <= 2.0)) throw std::invalid_argument("stable kernel needs 0 < alpha <= 2");
    if (d < 3 && !(alpha < d)) throw std::invalid_argument("stable kernel needs alpha < d");
    if (d < 1) throw std::invalid_argument("stable kernel needs d >= 1");
    return Kernel(Kernel::StablePotential{alpha, d, stable_potential_constant(alpha, d)});
}

Kernel log_adjusted(const Kernel& base) { return Kernel(Kernel::LogAdjusted{std::make_shared<const Kernel>(base)}); }

double smoothed_value(const Kernel& base, double eps, int d) {
    if (!(eps > 0.0)) throw std::invalid_argument("smoothing radius must be positive");
    if (d < 1) throw std::invalid_argument("smoothing dimension must be >= 1");
    if (!(base.singularity_exponent() < d))
        throw DivergentKernel("kernel " + base.describe() + " is not integrable against s^{d-1} ds at 0 (d=" +
                              std::to_string(d) + ")");
    const auto& repr = base.repr();
    if (const auto* k = std::get_if<Kernel::Riesz>(&repr)) return d / (d - k->alpha) * std::pow(eps, -k->alpha);
    if (const auto* k = std::get_if<Kernel::StablePotential>(&repr)) {
        const double p = k->alpha - k->dim;  // f = c r^p
        return d * k->constant * std::pow(eps, p) / (p + d);
    }
    if (const auto* k = std::get_if<Kernel::Constant>(&repr)) return k->value;
    if (const auto* k = std::get_if<Kernel::LogAdjusted>(&repr)) {
        // c r^-p ln(1/r) vanishes beyond r = 1: d c eps^-d \int_0^x s^{m-1} ln(1/s) ds, m = d - p,
        // x = min(eps, 1).
        double c = 0.0, p = 0.0;
        if (const auto* r = std::get_if<Kernel::Riesz>(&k->base->repr())) {
            c = 1.0;
            p = r->alpha;
        } else if (const auto* s = std::get_if<Kernel::StablePotential>(&k->base->repr())) {
            c = s->constant;
            p = s->dim - s->alpha;
        }
        if (c > 0.0) {
            const double m = d - p;
            const double x = std::min(eps, 1.0);
            return d * c * std::pow(eps, -d) * std::pow(x, m) * (std::log(1.0 / x) / m + 1.0 / (m * m));
        }
    }

    // d \int_0^1 f(eps u) u^{d-1} du with u = t^k, k = 1/(d - p): the integrand becomes
    // k f(eps t^k) t^{kd-1}, bounded up to a log factor when f ~ r^-p. Points where t^k
    // underflows or f overflows carry no measurable mass and are dropped.
    const double k = 1.0 / (d - std::max(0.0, base.singularity_exponent()));
    auto integrand = [&](double t) {
        const double u = std::pow(t, k);
        if (!(u > 0.0)) return 0.0;
        const double v = base.eval(eps * u);
        if (v == 0.0 || !std::isfinite(v)) return 0.0;
        const double y = k * v * std::pow(t, k * d - 1.0);
        return std::isfinite(y) ? y : 0.0;
    };
    std::vector<double> breaks;
    for (double b : base.breakpoints()) breaks.push_back(std::pow(b / eps, 1.0 / k));
    const double value = d * detail::integrate_singular(integrand, 0.0, 1.0, breaks, 1e-12);
    if (!std::isfinite(value))
        throw DivergentKernel("smoothing integral of " + base.describe() + " did not converge");
    return value;
}

Kernel smooth(const Kernel& base, double eps, int d) {
    const double plateau = smoothed_value(base, eps, d);
    return Kernel(Kernel::Smoothed{std::make_shared<const Kernel>(base), eps, d, plateau});
}

Kernel constant_kernel(double value) {
    if (!(value >= 0.0) || !std::isfinite(value)) throw std::invalid_argument("constant kernel needs c >= 0");
    return Kernel(Kernel::Constant{value});
}

Kernel gaussian_kernel(double sigma) {
    if (!(sigma > 0.0)) throw std::invalid_argument("gaussian kernel needs sigma > 0");
    return Kernel(Kernel::Gaussian{sigma});
}

Kernel table_kernel(std::vector<double> radii, std::vector<double> values) {
    if (radii.empty() || radii.size() != values.size())
        throw std::invalid_argument("table kernel needs matching, nonempty radii and values");
    for (std::size_t i = 0; i < radii.size(); ++i) {
        if (!(radii[i] >= 0.0) || !(values[i] >= 0.0) || !std::isfinite(values[i]))
            throw std::invalid_argument("table kernel needs nonnegative radii and finite nonnegative values");
        if (i > 0 && (!(radii[i] > radii[i - 1]) || values[i] > values[i - 1]))
            throw std::invalid_argument("table kernel needs increasing radii and weakly decreasing values");
    }
    return Kernel(Kernel::Table{std::move(radii), std::move(values)});
}

double dyadic_increment(const Kernel& k, int n, double side) {
    if (n < 0) throw std::invalid_argument("dyadic level must be >= 0");
    const double r = std::ldexp(side, -n);
    const double fine = k.eval(r);
    if (!std::isfinite(fine)) return kInf;
    return fine - k.eval(2.0 * r);
}

// --- specification strings -------------------------------------------------------------

namespace {

double parse_double(std::string_view token, std::string_view value) {
    double out = 0.0;
    const auto* end = value.data() + value.size();
    auto [p, ec] = std::from_chars(value.data(), end, out);
    if (ec != std::errc() || p != end)
        throw KernelSpecError(std::string(token), "kernel spec: bad number in '" + std::string(token) + "'");
    return out;
}

struct Params {
    std::vector<std::pair<std::string, std::string>> items;

    std::optional<std::string> take(const std::string& key) {
        for (auto it = items.begin(); it != items.end(); ++it)
            if (it->first == key) {
                auto v = it->second;
                items.erase(it);
                return v;
            }
        return std::nullopt;
    }
};

Params parse_params(std::string_view body) {
    Params p;
    while (!body.empty()) {
        const auto comma = body.find(',');
        const auto item = body.substr(0, comma);
        const auto eq = item.find('=');
        if (eq == std::string_view::npos || eq == 0)
            throw KernelSpecError(std::string(item), "kernel spec: expected key=value, got '" + std::string(item) + "'");
        p.items.emplace_back(std::string(item.substr(0, eq)), std::string(item.substr(eq + 1)));
        if (comma == std::string_view::npos) break;
        body.remove_prefix(comma + 1);
    }
    return p;
}

std::vector<double> parse_list(const std::string& token, const std::string& v) {
    std::vector<double> out;
    std::string_view s = v;
    while (true) {
        const auto bar = s.find('|');
        out.push_back(parse_double(token, s.substr(0, bar)));
        if (bar == std::string_view::npos) break;
        s.remove_prefix(bar + 1);
    }
    return out;
}

double require(Params& p, const std::string& key, std::string_view family) {
    auto v = p.take(key);
    if (!v)
        throw KernelSpecError(std::string(family), "kernel spec: '" + std::string(family) + "' needs " + key + "=");
    return parse_double(key + "=" + *v, *v);
}

void reject_leftovers(const Params& p) {
    if (!p.items.empty()) {
        const auto& [k, v] = p.items.front();
        throw KernelSpecError(k + "=" + v, "kernel spec: unknown parameter '" + k + "'");
    }
}

template <class Fn>
auto wrap(const std::string& token, Fn&& fn) {
    try {
        return fn();
    } catch (const KernelSpecError&) {
        throw;
    } catch (const std::exception& e) {
        throw KernelSpecError(token, std::string("kernel spec '") + token + "': " + e.what());
    }
}

}  // namespace

Kernel parse_kernel(std::string_view spec, int default_dim) {
    const auto colon = spec.find(':');
    const std::string family(spec.substr(0, colon));
    const std::string_view rest = colon == std::string_view::npos ? std::string_view{} : spec.substr(colon + 1);

    if (family == "logadj") {
        if (rest.empty()) throw KernelSpecError(family, "kernel spec: 'logadj' needs a base kernel");
        return log_adjusted(parse_kernel(rest, default_dim));
    }
    if (family == "smooth") {
        const auto next = rest.find(':');
        if (next == std::string_view::npos)
            throw KernelSpecError(std::string(rest), "kernel spec: 'smooth' needs parameters and a base kernel");
        auto p = parse_params(rest.substr(0, next));
        const double eps = require(p, "eps", family);
        int d = default_dim;
        if (auto dv = p.take("d")) d = static_cast<int>(parse_double("d=" + *dv, *dv));
        reject_leftovers(p);
        const Kernel base = parse_kernel(rest.substr(next + 1), d);
        return wrap(std::string(spec), [&] { return smooth(base, eps, d); });
    }
    if (rest.find(':') != std::string_view::npos)
        throw KernelSpecError(std::string(rest), "kernel spec: unexpected ':' after '" + family + "'");

    auto p = parse_params(rest);
    const std::string token(spec);
    if (family == "riesz") {
        const double a = require(p, "alpha", family);
        reject_leftovers(p);
        return wrap(token, [&] { return riesz_kernel(a); });
    }
    if (family == "stable") {
        const double a = require(p, "alpha", family);
        int d = default_dim;
        if (auto dv = p.take("d")) d = static_cast<int>(parse_double("d=" + *dv, *dv));
        reject_leftovers(p);
        return wrap(token, [&] { return stable_potential_kernel(a, d); });
    }
    if (family == "const") {
        const double c = require(p, "c", family);
        reject_leftovers(p);
        return wrap(token, [&] { return constant_kernel(c); });
    }
    if (family == "gauss") {
        const double s = require(p, "sigma", family);
        reject_leftovers(p);
        return wrap(token, [&] { return gaussian_kernel(s); });
    }
    if (family == "table") {
        auto r = p.take("r");
        auto f = p.take("f");
        if (!r || !f) throw KernelSpecError(family, "kernel spec: 'table' needs r= and f=");
        reject_leftovers(p);
        auto radii = parse_list("r=" + *r, *r);
        auto values = parse_list("f=" + *f, *f);
        return wrap(token, [&] { return table_kernel(std::move(radii), std::move(values)); });
    }
    throw KernelSpecError(family, "kernel spec: unknown kernel family '" + family + "'");
}

}  // namespace capmc
