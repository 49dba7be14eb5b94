#include "config.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <stdexcept>

#include "capmc/records.hpp"
#include "json.hpp"

namespace capmc::cli {

namespace {

double to_double(std::string_view s) {
    double v = 0.0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last || !std::isfinite(v))
        throw std::invalid_argument("not a finite number: '" + std::string(s) + "'");
    return v;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    for (;;) {
        const auto pos = s.find(sep);
        out.push_back(s.substr(0, pos));
        if (pos == std::string_view::npos) break;
        s.remove_prefix(pos + 1);
    }
    return out;
}

std::string trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    return std::string(s);
}

}  // namespace

std::vector<double> parse_grid(std::string_view text) {
    if (text.find(':') == std::string_view::npos) {
        std::vector<double> out;
        for (auto piece : split(text, ',')) out.push_back(to_double(trim(piece)));
        return out;
    }
    const auto parts = split(text, ':');
    if (parts.size() < 3) throw std::invalid_argument("grid needs start:stop:halving or start:stop:linear:k");
    const double start = to_double(trim(parts[0]));
    const double stop = to_double(trim(parts[1]));
    const std::string mode = trim(parts[2]);
    std::vector<double> out;
    if (mode == "halving") {
        if (parts.size() != 3) throw std::invalid_argument("halving grid takes no count");
        if (!(start > 0.0) || !(stop > 0.0)) throw std::invalid_argument("halving grid needs positive ends");
        if (stop > start) throw std::invalid_argument("halving grid needs start >= stop");
        // Tolerate stop values written with rounding, e.g. 0.001953125 vs 2^-9.
        for (double x = start; x >= stop * (1.0 - 1e-12); x *= 0.5) out.push_back(x);
        return out;
    }
    if (mode == "linear") {
        if (parts.size() != 4) throw std::invalid_argument("linear grid needs a point count: start:stop:linear:k");
        int k = 0;
        const std::string count = trim(parts[3]);
        auto [ptr, ec] = std::from_chars(count.data(), count.data() + count.size(), k);
        if (ec != std::errc() || ptr != count.data() + count.size() || k < 1)
            throw std::invalid_argument("linear grid count must be a positive integer");
        if (k == 1) return {start};
        for (int i = 0; i < k; ++i) out.push_back(start + (stop - start) * i / (k - 1));
        return out;
    }
    throw std::invalid_argument("unknown grid mode '" + mode + "' (halving or linear)");
}

std::vector<ConfigEntry> load_flat_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot read config file " + path);
    nlohmann::ordered_json doc;
    try {
        doc = nlohmann::ordered_json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument("config file " + path + ": " + e.what());
    }
    if (!doc.is_object()) throw std::invalid_argument("config file must hold one flat JSON object");

    std::vector<ConfigEntry> out;
    for (const auto& [key, v] : doc.items()) {
        ConfigEntry e{key, "", false};
        if (v.is_boolean()) {
            e.is_flag = true;
            e.value = v.get<bool>() ? "true" : "false";
        } else if (v.is_number()) {
            e.value = v.is_number_integer() ? v.dump() : format_number(v.get<double>());
        } else if (v.is_string()) {
            e.value = v.get<std::string>();
        } else if (v.is_array()) {
            for (const auto& x : v) {
                if (!x.is_number()) throw std::invalid_argument("config key '" + key + "': arrays hold numbers only");
                if (!e.value.empty()) e.value += ',';
                e.value += x.is_number_integer() ? x.dump() : format_number(x.get<double>());
            }
        } else {
            throw std::invalid_argument("config key '" + key + "': value must be a number, string, boolean or array");
        }
        out.push_back(std::move(e));
    }
    return out;
}

std::vector<std::string> config_tokens(const std::vector<ConfigEntry>& entries) {
    std::vector<std::string> out;
    for (const auto& e : entries) {
        if (e.is_flag) {
            out.push_back("--" + e.key + "=" + e.value);
            continue;
        }
        out.push_back("--" + e.key);
        out.push_back(e.value);
    }
    return out;
}

int workers_from_env() {
    const char* raw = std::getenv("CAPMC_WORKERS");
    if (raw == nullptr || *raw == '\0') return 0;
    int n = 0;
    const std::string_view s(raw);
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), n);
    if (ec != std::errc() || ptr != s.data() + s.size() || n < 1)
        throw std::invalid_argument("CAPMC_WORKERS must be a positive integer");
    return n;
}

}  // namespace capmc::cli
