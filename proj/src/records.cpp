#include "capmc/records.hpp"

#include <charconv>
#include <cmath>
#include <ostream>

#include "json.hpp"

namespace capmc {

std::optional<double> ExperimentRecord::find_diag(const std::string& key) const {
    for (const auto& [k, v] : diagnostics)
        if (k == key) return v;
    return std::nullopt;
}

std::string format_number(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

void write_csv(const std::vector<ExperimentRecord>& rows, std::ostream& os) {
    os << "experiment,replica,quantity,scale_kind,scale,estimate,reference,diagnostics,seed\n";
    for (const auto& r : rows) {
        os << r.experiment << ',' << r.replica << ',' << r.quantity << ',' << r.scale_kind << ','
           << format_number(r.scale) << ',' << format_number(r.estimate) << ','
           << (r.reference ? format_number(*r.reference) : std::string("n/a")) << ',';
        for (std::size_t i = 0; i < r.diagnostics.size(); ++i)
            os << (i ? ";" : "") << r.diagnostics[i].first << '=' << format_number(r.diagnostics[i].second);
        os << ',' << r.seed << '\n';
    }
}

namespace {

/// Finite values as JSON numbers; non-finite ones as strings so nothing is lost.
nlohmann::ordered_json number(double x) {
    if (std::isfinite(x)) return x;
    return format_number(x);
}

}  // namespace

void write_jsonl(const std::vector<ExperimentRecord>& rows, std::ostream& os) {
    for (const auto& r : rows) {
        nlohmann::ordered_json j;
        j["experiment"] = r.experiment;
        j["replica"] = r.replica;
        j["quantity"] = r.quantity;
        j["scale_kind"] = r.scale_kind;
        j["scale"] = number(r.scale);
        j["estimate"] = number(r.estimate);
        j["reference"] = r.reference ? number(*r.reference) : nlohmann::ordered_json("n/a");
        auto& diag = j["diagnostics"] = nlohmann::ordered_json::object();
        for (const auto& [k, v] : r.diagnostics) diag[k] = number(v);
        j["seed"] = r.seed;
        os << j.dump() << '\n';
    }
}

void write_records(const std::vector<ExperimentRecord>& rows, OutputFormat fmt, std::ostream& os) {
    if (fmt == OutputFormat::csv)
        write_csv(rows, os);
    else
        write_jsonl(rows, os);
}

}  // namespace capmc
