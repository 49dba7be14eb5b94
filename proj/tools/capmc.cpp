// capmc: command-line front end over the experiments library.
//
// Exit codes: 0 ok, 1 internal error, 2 bad arguments or guard violation,
// 3 a replica aborted (its row is still written), 4 I/O failure.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <boost/version.hpp>

#include "CLI11.hpp"
#include "capmc/capacity.hpp"
#include "capmc/experiments.hpp"
#include "capmc/kernel.hpp"
#include "capmc/parallel.hpp"
#include "config.hpp"
#include "json.hpp"

namespace {

using capmc::ExperimentRecord;
using json = nlohmann::ordered_json;

constexpr const char* kVersion = "0.1.0";

enum Exit { kOk = 0, kInternal = 1, kUsage = 2, kAborted = 3, kIo = 4 };

/// Error that maps straight to an exit code.
struct Failure {
    int code;
    std::string message;
};

struct Common {
    std::string out = "-";
    std::string format = "csv";
    int workers = 0;
    std::string config;
    std::string dump_path;
};

struct Grids {
    std::string sigma = "0.25:0.00390625:halving";
    std::string moment_sigma = "0.125,0.03125";
    std::string cap_alpha = "0.25:1.75:linear:7";
    std::string delta = "0.0625:0.0009765625:halving";
    std::string energy_alpha = "0.1,0.2,0.3,0.4";
    std::string eps = "0.25:0.03125:halving";
    std::string x_start;
};

struct EquilibriumArgs {
    std::string points;
    std::string kernel;
    double tol = 1e-6;
    std::size_t max_iters = 50000;
};

struct Args {
    Common common;
    Grids grids;
    capmc::StrongLawConfig strong_law;
    capmc::MomentsConfig moments;
    capmc::SausageConfig sausage;
    capmc::CapEquivConfig cap_equiv;
    capmc::ZeroSetConfig zero_set;
    capmc::ApproachConfig approach;
    EquilibriumArgs equilibrium;
};

void add_common(CLI::App* sub, Common& c, bool has_path) {
    sub->add_option("--out", c.out, "Output table path ('-' for stdout)");
    sub->add_option("--format", c.format, "csv or jsonl")->check(CLI::IsMember({"csv", "jsonl"}));
    sub->add_option("--workers", c.workers, "Worker threads (default: CAPMC_WORKERS, else all cores)")
        ->check(CLI::PositiveNumber);
    sub->add_option("--config", c.config, "Flat JSON file of option values; flags override it");
    if (has_path) sub->add_option("--dump-path", c.dump_path, "Write the replica-0 path as CSV (t,x1,...,xd)");
}

struct Cli {
    CLI::App app{"Monte Carlo capacity experiments for Brownian paths and zero sets", "capmc"};
    std::vector<std::pair<std::string, CLI::App*>> subs;

    explicit Cli(Args& a) {
        app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
        app.require_subcommand(1);
        app.set_version_flag("--version", kVersion);

        auto* s = add("strong-law", "Gaussian self-energy S_sigma / sigma^2 of the occupation measure");
        s->add_option("--dim", a.strong_law.dim)->required()->check(CLI::Range(1, 20));
        s->add_option("--steps", a.strong_law.n_steps)->check(CLI::PositiveNumber);
        s->add_option("--sigma", a.grids.sigma, "sigma grid");
        s->add_option("--replicas", a.strong_law.replicas)->check(CLI::PositiveNumber);
        s->add_option("--seed", a.strong_law.seed);
        s->add_option("--cutoff", a.strong_law.cutoff, "Gaussian cutoff in units of sigma");
        s->add_option("--points-per-sigma2", a.strong_law.points_per_sigma2);
        add_common(s, a.common, true);

        s = add("moments", "Quadrature moments of S_sigma, optionally checked against replicas");
        s->add_option("--dim", a.moments.dim)->required()->check(CLI::Range(1, 20));
        s->add_option("--sigma", a.grids.moment_sigma, "sigma grid");
        s->add_option("--replicas", a.moments.replicas, "0 for quadrature only")->check(CLI::NonNegativeNumber);
        s->add_option("--steps", a.moments.n_steps)->check(CLI::PositiveNumber);
        s->add_option("--seed", a.moments.seed);
        s->add_option("--cutoff", a.moments.cutoff);
        s->add_option("--points-per-sigma2", a.moments.points_per_sigma2);
        add_common(s, a.common, true);

        s = add("sausage", "Dyadic box counts of the path, scaled by 4^-n");
        s->add_option("--dim", a.sausage.dim)->required()->check(CLI::Range(2, 20));
        s->add_option("--steps", a.sausage.n_steps)->check(CLI::PositiveNumber);
        s->add_option("--n-min", a.sausage.n_min);
        s->add_option("--n-max", a.sausage.n_max);
        s->add_option("--replicas", a.sausage.replicas)->check(CLI::PositiveNumber);
        s->add_option("--seed", a.sausage.seed);
        add_common(s, a.common, true);

        s = add("cap-equiv", "Occupation-measure capacity over reference square capacity across Riesz kernels");
        s->add_option("--dim", a.cap_equiv.dim)->required()->check(CLI::Range(2, 20));
        s->add_option("--alpha", a.grids.cap_alpha, "alpha grid");
        s->add_option("--steps", a.cap_equiv.n_steps)->check(CLI::PositiveNumber);
        s->add_option("--n-max", a.cap_equiv.n_max);
        s->add_option("--replicas", a.cap_equiv.replicas)->check(CLI::PositiveNumber);
        s->add_option("--seed", a.cap_equiv.seed);
        s->add_flag("--log-adjust,!--no-log-adjust", a.cap_equiv.log_adjust,
                    "d = 2: reference capacity of f log(1/r) (default on)");
        add_common(s, a.common, true);

        s = add("zero-set", "Zero set of one-dimensional Brownian motion: Levy counts, box counts, local time");
        s->add_option("--steps", a.zero_set.n_steps)->check(CLI::PositiveNumber);
        s->add_option("--delta", a.grids.delta, "delta grid");
        s->add_option("--n-min", a.zero_set.n_min);
        s->add_option("--n-max", a.zero_set.n_max);
        s->add_option("--energy-alpha", a.grids.energy_alpha, "Riesz exponents for the local-time energy");
        s->add_option("--replicas", a.zero_set.replicas)->check(CLI::PositiveNumber);
        s->add_option("--seed", a.zero_set.seed);
        add_common(s, a.common, true);

        s = add("approach", "Probability that a stable process comes within eps of a Brownian path");
        s->add_option("--dim", a.approach.dim)->required()->check(CLI::Range(3, 20));
        s->add_option("--alpha", a.approach.alpha);
        s->add_option("--steps", a.approach.n_steps)->check(CLI::PositiveNumber);
        s->add_option("--eps", a.grids.eps, "eps grid");
        s->add_option("--x-start", a.grids.x_start, "Comma list of dim coordinates (default: automatic)");
        s->add_option("--mc-paths", a.approach.mc_paths)->check(CLI::PositiveNumber);
        s->add_option("--seed", a.approach.seed);
        s->add_option("--n-max", a.approach.n_max);
        s->add_option("--max-steps", a.approach.max_steps)->check(CLI::PositiveNumber);
        s->add_option("--escape-factor", a.approach.escape_factor);
        s->add_option("--bracket-widening", a.approach.bracket_widening);
        add_common(s, a.common, true);

        s = add("equilibrium", "Equilibrium measure of a point cloud for a bounded kernel");
        s->add_option("--points", a.equilibrium.points, "CSV file, one point per row")->required();
        s->add_option("--kernel", a.equilibrium.kernel, "Kernel spec, e.g. smooth:eps=0.01:riesz:alpha=1")
            ->required();
        s->add_option("--tol", a.equilibrium.tol)->check(CLI::PositiveNumber);
        s->add_option("--max-iters", a.equilibrium.max_iters)->check(CLI::PositiveNumber);
        add_common(s, a.common, false);
    }

    CLI::App* add(const std::string& name, const std::string& help) {
        auto* s = app.add_subcommand(name, help);
        subs.emplace_back(name, s);
        return s;
    }

    CLI::App* find(const std::string& name) const {
        for (const auto& [n, s] : subs)
            if (n == name) return s;
        return nullptr;
    }
};

std::vector<double> grid_option(const std::string& flag, const std::string& text) {
    try {
        return capmc::cli::parse_grid(text);
    } catch (const std::invalid_argument& e) {
        throw Failure{kUsage, flag + ": " + e.what()};
    }
}

/// Splices `--config` file entries in front of the command-line options so the latter win.
std::vector<std::string> expand_config(const std::vector<std::string>& tokens, const Cli& cli) {
    if (tokens.empty()) return tokens;
    const CLI::App* sub = cli.find(tokens[0]);
    if (sub == nullptr) return tokens;

    std::optional<std::string> path;
    for (std::size_t i = 1; i < tokens.size(); ++i) {
        if (tokens[i] == "--config" && i + 1 < tokens.size()) path = tokens[i + 1];
        else if (tokens[i].rfind("--config=", 0) == 0) path = tokens[i].substr(9);
    }
    if (!path) return tokens;

    std::vector<capmc::cli::ConfigEntry> entries;
    try {
        entries = capmc::cli::load_flat_config(*path);
    } catch (const std::invalid_argument& e) {
        throw Failure{kUsage, std::string("--config: ") + e.what()};
    }
    for (const auto& e : entries)
        if (e.key == "config" || e.key == "help" || sub->get_option_no_throw("--" + e.key) == nullptr)
            throw Failure{kUsage, "--config: unknown key '" + e.key + "' for " + tokens[0]};

    std::vector<std::string> out{tokens[0]};
    for (auto& t : capmc::cli::config_tokens(entries)) out.push_back(std::move(t));
    out.insert(out.end(), tokens.begin() + 1, tokens.end());
    return out;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Failure{kIo, "cannot open " + path + " for writing"};
    f << text;
    f.flush();
    if (!f) throw Failure{kIo, "write to " + path + " failed"};
}

json versions() {
    json v;
    v["capmc"] = kVersion;
    v["compiler"] = __VERSION__;
    v["boost"] = BOOST_LIB_VERSION;
#ifdef _OPENMP
    v["openmp"] = _OPENMP;
#endif
    return v;
}

json to_json(const capmc::StrongLawConfig& c) {
    return {{"dim", c.dim},         {"steps", c.n_steps},   {"sigma", c.sigmas},
            {"replicas", c.replicas}, {"seed", c.seed},     {"cutoff", c.cutoff},
            {"points-per-sigma2", c.points_per_sigma2}};
}
json to_json(const capmc::MomentsConfig& c) {
    return {{"dim", c.dim},   {"sigma", c.sigmas},   {"replicas", c.replicas},
            {"steps", c.n_steps}, {"seed", c.seed}, {"cutoff", c.cutoff},
            {"points-per-sigma2", c.points_per_sigma2}};
}
json to_json(const capmc::SausageConfig& c) {
    return {{"dim", c.dim},     {"steps", c.n_steps},     {"n-min", c.n_min},
            {"n-max", c.n_max}, {"replicas", c.replicas}, {"seed", c.seed}};
}
json to_json(const capmc::CapEquivConfig& c) {
    return {{"dim", c.dim},         {"alpha", c.alphas},       {"steps", c.n_steps}, {"n-max", c.n_max},
            {"replicas", c.replicas}, {"seed", c.seed}, {"log-adjust", c.log_adjust}};
}
json to_json(const capmc::ZeroSetConfig& c) {
    return {{"steps", c.n_steps}, {"delta", c.deltas},       {"n-min", c.n_min},  {"n-max", c.n_max},
            {"energy-alpha", c.energy_alphas}, {"replicas", c.replicas}, {"seed", c.seed}};
}
json to_json(const capmc::ApproachConfig& c) {
    return {{"dim", c.dim},
            {"alpha", c.alpha},
            {"steps", c.n_steps},
            {"eps", c.eps},
            {"x-start", c.x_start},
            {"mc-paths", c.mc_paths},
            {"seed", c.seed},
            {"n-max", c.n_max},
            {"max-steps", c.max_steps},
            {"escape-factor", c.escape_factor},
            {"bracket-widening", c.bracket_widening}};
}

/// Guarded parameters of the library's validate(), echoed for the reader of the metadata.
json guards_for(const std::string& name, const Args& a) {
    auto inv_sqrt = [](std::size_t n) { return 1.0 / std::sqrt(static_cast<double>(n)); };
    if (name == "strong-law") return {{"sigma_min >= 4*n_steps^(-1/2)", 4.0 * inv_sqrt(a.strong_law.n_steps)}};
    if (name == "moments") return {{"sigma_min >= 4*n_steps^(-1/2)", 4.0 * inv_sqrt(a.moments.n_steps)}};
    if (name == "sausage") return {{"2^n_max <= n_steps^(1/2)", 1.0 / inv_sqrt(a.sausage.n_steps)}};
    if (name == "cap-equiv") return {{"|alpha - 2| >= 0.1", 0.1}, {"alpha < dim", a.cap_equiv.dim}};
    if (name == "zero-set")
        return {{"delta_min >= 10/n_steps", 10.0 / static_cast<double>(a.zero_set.n_steps)},
                {"|alpha - 1/2| >= 0.1", 0.1}};
    if (name == "approach") {
        const double res = std::max(inv_sqrt(a.approach.n_steps),
                                    2.0 * capmc::kPathBoxHalfWidth * std::ldexp(1.0, -a.approach.n_max));
        return {{"eps_min >= 4*resolution", 4.0 * res}, {"x_start distance >= max(0.1, eps_max)", 0.1}};
    }
    return json::object();
}

capmc::PointSet read_points(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Failure{kIo, "cannot read points file " + path};
    capmc::PointSet ps;
    ps.dim = 0;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::vector<double> row;
        try {
            row = capmc::cli::parse_grid(line);
        } catch (const std::invalid_argument&) {
            if (ps.coords.empty() && ps.dim == 0 && lineno == 1) continue;  // header
            throw Failure{kUsage, "--points: " + path + ":" + std::to_string(lineno) + ": not a row of numbers"};
        }
        if (ps.dim == 0) ps.dim = static_cast<int>(row.size());
        if (static_cast<int>(row.size()) != ps.dim)
            throw Failure{kUsage, "--points: " + path + ":" + std::to_string(lineno) + ": expected " +
                                      std::to_string(ps.dim) + " coordinates"};
        ps.coords.insert(ps.coords.end(), row.begin(), row.end());
    }
    if (ps.size() == 0) throw Failure{kUsage, "--points: " + path + " holds no points"};
    return ps;
}

std::vector<ExperimentRecord> run_equilibrium(const EquilibriumArgs& a, json& resolved) {
    std::optional<capmc::Kernel> k;
    const capmc::PointSet ps = read_points(a.points);
    try {
        k = capmc::parse_kernel(a.kernel, ps.dim);
    } catch (const capmc::KernelSpecError& e) {
        throw Failure{kUsage, "--kernel: " + std::string(e.what())};
    }
    if (!k->bounded())
        throw Failure{kUsage, "--kernel: " + k->describe() +
                                  " is unbounded at 0; the equilibrium solver needs f(0) < inf, e.g. smooth:eps=0.01:" +
                                  k->describe()};
    resolved = {{"points", a.points}, {"kernel", k->describe()}, {"tol", a.tol}, {"max-iters", a.max_iters},
                {"dim", ps.dim},      {"n_points", ps.size()}};

    const capmc::EquilibriumResult res = capmc::equilibrium_measure(ps, *k, a.tol, a.max_iters);
    std::vector<ExperimentRecord> rows;
    for (std::size_t i = 0; i < res.weights.size(); ++i) {
        ExperimentRecord r;
        r.experiment = "equilibrium";
        r.replica = 0;
        r.quantity = "weight";
        r.scale_kind = "point";
        r.scale = static_cast<double>(i);
        r.estimate = res.weights[i];
        rows.push_back(std::move(r));
    }
    const capmc::CapacityEstimate cap = res.capacity(*k);
    ExperimentRecord r;
    r.experiment = "equilibrium";
    r.replica = 0;
    r.quantity = "capacity";
    r.scale_kind = "points";
    r.scale = static_cast<double>(ps.size());
    r.estimate = cap.value;
    r.diag("energy", res.energy)
        .diag("gap", res.gap)
        .diag("iterations", static_cast<double>(res.iterations))
        .diag("converged", res.converged ? 1.0 : 0.0)
        .diag("min_rayleigh", res.min_rayleigh);
    rows.push_back(std::move(r));
    return rows;
}

int run(const std::vector<std::string>& raw_tokens) {
    Args args;
    Cli cli(args);
    std::vector<std::string> tokens = expand_config(raw_tokens, cli);
    std::reverse(tokens.begin(), tokens.end());
    try {
        cli.app.parse(tokens);
    } catch (const CLI::ParseError& e) {
        const int code = cli.app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    std::string name;
    for (const auto& [n, s] : cli.subs)
        if (s->parsed()) name = n;
    Common& common = args.common;

    int workers = common.workers;
    try {
        if (workers == 0) workers = capmc::cli::workers_from_env();
    } catch (const std::invalid_argument& e) {
        throw Failure{kUsage, e.what()};
    }
    if (workers > 0) capmc::set_worker_count(workers);

    Grids& g = args.grids;
    json resolved;
    std::vector<ExperimentRecord> rows;
    std::optional<std::pair<int, std::size_t>> path_spec;  // dim, n_steps of replica 0
    std::uint64_t seed = 0;

    try {
        if (name == "strong-law") {
            auto& c = args.strong_law;
            c.sigmas = grid_option("--sigma", g.sigma);
            capmc::validate(c);
            resolved = to_json(c);
            path_spec = {c.dim, c.n_steps};
            seed = c.seed;
            rows = capmc::run_strong_law(c);
        } else if (name == "moments") {
            auto& c = args.moments;
            c.sigmas = grid_option("--sigma", g.moment_sigma);
            capmc::validate(c);
            resolved = to_json(c);
            path_spec = {c.dim, c.n_steps};
            seed = c.seed;
            rows = capmc::run_moments(c);
        } else if (name == "sausage") {
            auto& c = args.sausage;
            capmc::validate(c);
            resolved = to_json(c);
            path_spec = {c.dim, c.n_steps};
            seed = c.seed;
            rows = capmc::run_sausage_counts(c);
        } else if (name == "cap-equiv") {
            auto& c = args.cap_equiv;
            c.alphas = grid_option("--alpha", g.cap_alpha);
            capmc::validate(c);
            resolved = to_json(c);
            path_spec = {c.dim, c.n_steps};
            seed = c.seed;
            rows = capmc::run_capacity_equivalence(c);
        } else if (name == "zero-set") {
            auto& c = args.zero_set;
            c.deltas = grid_option("--delta", g.delta);
            c.energy_alphas = grid_option("--energy-alpha", g.energy_alpha);
            capmc::validate(c);
            resolved = to_json(c);
            path_spec = {1, c.n_steps};
            seed = c.seed;
            rows = capmc::run_zero_set(c);
        } else if (name == "approach") {
            auto& c = args.approach;
            c.eps = grid_option("--eps", g.eps);
            if (!g.x_start.empty()) c.x_start = grid_option("--x-start", g.x_start);
            capmc::validate(c);
            resolved = to_json(c);
            path_spec = {c.dim, c.n_steps};
            seed = c.seed;
            rows = capmc::run_approach(c);
        } else {
            rows = run_equilibrium(args.equilibrium, resolved);
        }
    } catch (const capmc::GuardViolation& e) {
        throw Failure{kUsage, name + ": " + e.what()};
    } catch (const std::invalid_argument& e) {
        throw Failure{kUsage, name + ": " + e.what()};
    }

    std::ostringstream table;
    capmc::write_records(rows, common.format == "jsonl" ? capmc::OutputFormat::jsonl : capmc::OutputFormat::csv,
                         table);
    if (common.out == "-") {
        std::cout << table.str() << std::flush;
        if (!std::cout) throw Failure{kIo, "write to stdout failed"};
    } else {
        write_text(common.out, table.str());
        json meta;
        meta["experiment"] = name;
        meta["config"] = resolved;
        meta["format"] = common.format;
        meta["workers"] = capmc::worker_count();
        meta["versions"] = versions();
        meta["guards"] = guards_for(name, args);
        meta["rows"] = rows.size();
        write_text(common.out + ".meta.json", meta.dump(2) + "\n");
    }

    if (!common.dump_path.empty() && path_spec) {
        std::ostringstream os;
        capmc::write_path_csv(capmc::replica_path(path_spec->first, path_spec->second, seed, 0), os);
        write_text(common.dump_path, os.str());
    }

    const bool aborted = std::any_of(rows.begin(), rows.end(),
                                     [](const ExperimentRecord& r) { return r.quantity == capmc::kAbortedQuantity; });
    if (aborted) {
        std::cerr << "capmc: at least one replica aborted (path left the normalization box)\n";
        return kAborted;
    }
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    std::vector<std::string> tokens(argv + 1, argv + argc);
    try {
        return run(tokens);
    } catch (const Failure& f) {
        std::cerr << "capmc: " << f.message << "\n";
        return f.code;
    } catch (const std::exception& e) {
        std::cerr << "capmc: internal error: " << e.what() << "\n";
        return kInternal;
    }
}
