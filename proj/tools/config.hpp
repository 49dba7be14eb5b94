#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace capmc::cli {

/// `start:stop:halving` (halves down to the last value >= stop), `start:stop:linear:k`, or a
/// comma list. Throws std::invalid_argument.
std::vector<double> parse_grid(std::string_view text);

struct ConfigEntry {
    std::string key;
    std::string value;  // "true" / "false" for booleans
    bool is_flag = false;
};

/// Flat JSON object: numbers, strings, booleans, arrays of numbers. Nested objects and null
/// are rejected. Throws std::invalid_argument with the offending key.
std::vector<ConfigEntry> load_flat_config(const std::string& path);

/// argv-style tokens: `--key value`, or `--key=true|false` for booleans. Arrays become comma lists.
std::vector<std::string> config_tokens(const std::vector<ConfigEntry>& entries);

/// Worker count from CAPMC_WORKERS, or 0 when unset. Throws std::invalid_argument if malformed.
int workers_from_env();

}  // namespace capmc::cli
