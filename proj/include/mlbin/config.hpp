#pragma once

// key = value text files for scaling configs, exploration grids and gate
// cost constants. '#' starts a comment; blank lines are ignored.

#include <charconv>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "mlbin/binarized_lstm.hpp"
#include "mlbin/cost_model.hpp"
#include "mlbin/dataset.hpp"
#include "mlbin/error.hpp"
#include "mlbin/explorer.hpp"

namespace mlbin {

using KeyValues = std::map<std::string, std::string, std::less<>>;

namespace detail {

inline std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(std::string_view text, std::string_view key) {
    T value{};
    const auto t = trim(text);
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
    if (ec != std::errc{} || ptr != t.data() + t.size() || t.empty())
        fail(ErrorKind::config, "value '" + std::string(text) + "' of key '" + std::string(key) + "' is not a number");
    return value;
}

template <typename T>
std::vector<T> parse_list(std::string_view text, std::string_view key) {
    std::vector<T> out;
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto comma = text.find(',', start);
        const auto item = text.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
        out.push_back(parse_number<T>(item, key));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

}  // namespace detail

inline KeyValues parse_key_values(std::string_view text) {
    KeyValues kv;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto nl = text.find('\n', pos);
        auto line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos)
            detail::fail(ErrorKind::config, "line " + std::to_string(line_no) + ": expected key = value");
        const auto key = std::string(detail::trim(line.substr(0, eq)));
        const auto value = std::string(detail::trim(line.substr(eq + 1)));
        if (key.empty() || value.empty())
            detail::fail(ErrorKind::config, "line " + std::to_string(line_no) + ": empty key or value");
        if (!kv.emplace(key, value).second)
            detail::fail(ErrorKind::config, "line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
    }
    return kv;
}

inline KeyValues load_key_values(const std::filesystem::path& path) {
    const auto buf = read_file(path);
    return parse_key_values(std::string_view(reinterpret_cast<const char*>(buf.data()), buf.size()));
}

/// Keys `<group>.levels` and `<group>.alpha_exp` for group in x, wfwd, wrec,
/// bias. Keys missing from `kv` keep the value from `base`; without a base
/// every key is required.
inline ScalingConfig scaling_config_from(const KeyValues& kv, std::optional<ScalingConfig> base = std::nullopt) {
    ScalingConfig cfg = base.value_or(ScalingConfig{});
    std::set<std::string, std::less<>> known;
    for (auto g : all_groups) {
        for (const char* field : {"levels", "alpha_exp"}) {
            const auto key = std::string(group_name(g)) + "." + field;
            known.insert(key);
            const auto it = kv.find(key);
            if (it == kv.end()) {
                if (!base.has_value()) detail::fail(ErrorKind::config, "missing key '" + key + "'");
                continue;
            }
            int& slot = std::string_view(field) == "levels" ? cfg[g].levels : cfg[g].alpha_exp;
            slot = detail::parse_number<int>(it->second, key);
        }
    }
    for (const auto& [k, v] : kv)
        if (!known.contains(k)) detail::fail(ErrorKind::config, "unknown key '" + k + "' in scaling config");
    cfg.validate();
    return cfg;
}

inline std::string scaling_config_text(const ScalingConfig& cfg) {
    std::string out;
    for (auto g : all_groups) {
        out += std::string(group_name(g)) + ".levels = " + std::to_string(cfg[g].levels) + "\n";
        out += std::string(group_name(g)) + ".alpha_exp = " + std::to_string(cfg[g].alpha_exp) + "\n";
    }
    return out;
}

/// Comma lists per group: `<group>.levels` (required) and `<group>.alpha_exp`
/// (optional; suggested from the value domain when absent). Optional
/// `tie_break = earliest|latest` and `features = mean|final`.
inline ExplorationSpec exploration_spec_from(const KeyValues& kv) {
    ExplorationSpec spec;
    for (const auto& [key, value] : kv) {
        if (key == "tie_break") {
            detail::require(value == "earliest" || value == "latest", ErrorKind::config,
                            "tie_break must be earliest or latest");
            spec.tie_break = value == "earliest" ? TieBreak::earliest : TieBreak::latest;
            continue;
        }
        if (key == "features") {
            detail::require(value == "mean" || value == "final", ErrorKind::config, "features must be mean or final");
            spec.features = value == "mean" ? FeatureSource::mean_hidden : FeatureSource::final_hidden;
            continue;
        }
        bool matched = false;
        for (auto g : all_groups) {
            const std::string prefix = std::string(group_name(g)) + ".";
            if (key == prefix + "levels") {
                spec[g].levels = detail::parse_list<int>(value, key);
                matched = true;
            } else if (key == prefix + "alpha_exp") {
                spec[g].alpha_exps = detail::parse_list<int>(value, key);
                matched = true;
            }
        }
        if (!matched) detail::fail(ErrorKind::config, "unknown key '" + key + "' in exploration spec");
    }
    for (auto g : all_groups)
        if (spec[g].levels.empty())
            detail::fail(ErrorKind::config, std::string("missing key '") + group_name(g) + ".levels'");
    return spec;
}

/// Overrides GateCostParams fields by name.
inline GateCostParams gate_cost_params_from(const KeyValues& kv, GateCostParams gc = {}) {
    for (const auto& [key, value] : kv) {
        if (key == "and_area")
            gc.and_area = detail::parse_number<double>(value, key);
        else if (key == "and_delay")
            gc.and_delay = detail::parse_number<double>(value, key);
        else if (key == "full_adder_area")
            gc.full_adder_area = detail::parse_number<double>(value, key);
        else if (key == "full_adder_delay")
            gc.full_adder_delay = detail::parse_number<double>(value, key);
        else if (key == "accumulator_guard_bits")
            gc.accumulator_guard_bits = detail::parse_number<int>(value, key);
        else if (key == "fp_baseline_area")
            gc.fp_baseline_area = detail::parse_number<double>(value, key);
        else if (key == "fp_baseline_delay")
            gc.fp_baseline_delay = detail::parse_number<double>(value, key);
        else
            detail::fail(ErrorKind::config, "unknown key '" + key + "' in gate cost constants");
    }
    gc.validate();
    return gc;
}

}  // namespace mlbin
