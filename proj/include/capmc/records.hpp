#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace capmc {

/// One output row. replica == -1 marks an aggregate over replicas.
struct ExperimentRecord {
    std::string experiment;
    int replica = -1;
    std::string quantity;
    std::string scale_kind;  // "sigma", "delta", "eps", "n", "alpha", ...
    double scale = 0.0;
    double estimate = 0.0;
    std::optional<double> reference;
    std::vector<std::pair<std::string, double>> diagnostics;
    std::uint64_t seed = 0;  // master seed

    ExperimentRecord& diag(std::string key, double value) {
        diagnostics.emplace_back(std::move(key), value);
        return *this;
    }
    std::optional<double> find_diag(const std::string& key) const;
};

enum class OutputFormat { csv, jsonl };

/// Shortest decimal that round-trips (std::to_chars); byte-stable for a given value.
std::string format_number(double x);

/// Header `experiment,replica,quantity,scale_kind,scale,estimate,reference,diagnostics,seed`;
/// diagnostics as `key=value;key=value`, a missing reference as `n/a`.
void write_csv(const std::vector<ExperimentRecord>& rows, std::ostream& os);
void write_jsonl(const std::vector<ExperimentRecord>& rows, std::ostream& os);
void write_records(const std::vector<ExperimentRecord>& rows, OutputFormat fmt, std::ostream& os);

}  // namespace capmc
